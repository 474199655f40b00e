use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::catalog::list_catalog;
use crate::entropy::{EntropyGenerator, EntropyKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ThetaScan,
    GaugeOptimize,
    FpDecay,
    DissipationIdentity,
    TvDissipation,
    McMartingale,
    Admissibility,
    Catalog,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ThetaScan => "theta-scan",
            ExperimentKind::GaugeOptimize => "gauge-optimize",
            ExperimentKind::FpDecay => "fp-decay",
            ExperimentKind::DissipationIdentity => "dissipation-identity",
            ExperimentKind::TvDissipation => "tv-dissipation",
            ExperimentKind::McMartingale => "mc-martingale",
            ExperimentKind::Admissibility => "admissibility",
            ExperimentKind::Catalog => "catalog",
        }
    }

    /// Tolerance keys the experiment reads, with their defaults.
    pub fn tolerance_defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            ExperimentKind::ThetaScan => &[("lambda_abs", 1e-6), ("certificate", 1e-9), ("min_lambda", 0.0)],
            ExperimentKind::GaugeOptimize => &[("min_lambda", 0.0)],
            ExperimentKind::FpDecay => &[("rate_rel", 0.05), ("sobolev_slack", 0.02)],
            ExperimentKind::DissipationIdentity => &[("rel", 0.02)],
            ExperimentKind::TvDissipation => &[("rel", 0.05), ("rhs_max", 0.0)],
            ExperimentKind::McMartingale => &[
                ("mean_z", 3.0),
                ("entropy_z", 3.0),
                ("drift_z", 4.0),
                ("submartingale_se", 2.0),
                ("clamped", 1e-3),
                ("girsanov_median", 5e-2),
            ],
            ExperimentKind::Admissibility => &[],
            ExperimentKind::Catalog => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { name: "ou1d".into(), params: BTreeMap::new() }
    }
}

/// Omitted bounds fall back to the model's recommended box, omitted node
/// counts to the catalog's.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub nodes: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_end: f64,
    /// Grid time step; the largest stable step dividing the snapshot spacing
    /// when omitted.
    pub dt: Option<f64>,
    pub snapshot_every: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_end: 2.0, dt: None, snapshot_every: 100 }
    }
}

/// Gaussian initial density `N(mean, var·I)`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub mean: Option<Vec<f64>>,
    pub var: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { mean: None, var: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub record_every: usize,
    /// Rerun with the reversed drift shifted by `control_shift` in every
    /// coordinate, expecting the drift tests to fire.
    pub negative_control: bool,
    pub control_shift: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_paths: 10_000, seed: 1, dt: 1e-3, record_every: 20, negative_control: true, control_shift: 0.5 }
    }
}

/// Pathwise check of the exponential form at each `dt`, finest last.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GirsanovConfig {
    pub dts: Vec<f64>,
    pub t_end: f64,
    pub n_paths: usize,
}

impl Default for GirsanovConfig {
    fn default() -> Self {
        Self { dts: vec![4e-4, 1e-4], t_end: 0.4, n_paths: 2000 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    pub kinds: Vec<String>,
    pub window: [f64; 2],
    /// Snapshot times probed by the dissipation experiments.
    pub samples: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self { kinds: vec!["kl".into(), "chi2".into()], window: [0.5, 2.0], samples: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeConfig {
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub samples: usize,
    pub log_spacing: bool,
    pub golden_iterations: usize,
    /// Nodes per axis of the search grid (example 1) or of the outer grid
    /// (example 2).
    pub nodes: usize,
    /// Nodes per axis of the grid used to re-verify the optimum.
    pub verify_nodes: usize,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        Self {
            eps_lo: 0.02,
            eps_hi: 0.32,
            samples: 7,
            log_spacing: false,
            golden_iterations: 8,
            nodes: 101,
            verify_nodes: 201,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub mc: McConfig,
    pub girsanov: Option<GirsanovConfig>,
    #[serde(default)]
    pub entropy: EntropyConfig,
    #[serde(default)]
    pub gauge: GaugeConfig,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("nibec-out")
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::config(key, "must be at least 1"))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("", e.message().to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::parse(&text)
    }

    pub fn tolerance(&self, key: &str) -> f64 {
        self.tolerances.get(key).copied().unwrap_or_else(|| {
            self.experiment
                .tolerance_defaults()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .expect("tolerance keys are listed per experiment")
        })
    }

    pub fn entropies(&self) -> Result<Vec<EntropyGenerator>> {
        self.entropy
            .kinds
            .iter()
            .enumerate()
            .map(|(i, k)| {
                EntropyKind::parse(k)
                    .and_then(EntropyGenerator::builtin)
                    .map_err(|e| Error::config(format!("entropy.kinds[{i}]"), e.to_string()))
            })
            .collect()
    }

    /// Schema checks that do not need a model; model-dependent checks happen
    /// when the experiment is prepared.
    pub fn validate(&self) -> Result<()> {
        if !list_catalog().iter().any(|e| e.name == self.model.name) {
            return Err(Error::config("model.name", format!("unknown model `{}`", self.model.name)));
        }
        let known = self.experiment.tolerance_defaults();
        for (k, v) in &self.tolerances {
            if !known.iter().any(|(n, _)| n == k) {
                return Err(Error::config(
                    format!("tolerances.{k}"),
                    format!("not a tolerance of {}", self.experiment.name()),
                ));
            }
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::config(format!("tolerances.{k}"), format!("must be finite and ≥ 0, got {v}")));
            }
        }
        positive("time.t_end", self.time.t_end)?;
        if let Some(dt) = self.time.dt {
            positive("time.dt", dt)?;
        }
        at_least_one("time.snapshot_every", self.time.snapshot_every)?;
        positive("initial.var", self.initial.var)?;
        at_least_one("mc.n_paths", self.mc.n_paths)?;
        positive("mc.dt", self.mc.dt)?;
        at_least_one("mc.record_every", self.mc.record_every)?;
        if !self.mc.control_shift.is_finite() {
            return Err(Error::config("mc.control_shift", "must be finite"));
        }
        if let Some(g) = &self.girsanov {
            if g.dts.is_empty() {
                return Err(Error::config("girsanov.dts", "needs at least one step"));
            }
            for (i, dt) in g.dts.iter().enumerate() {
                positive(&format!("girsanov.dts[{i}]"), *dt)?;
            }
            positive("girsanov.t_end", g.t_end)?;
            at_least_one("girsanov.n_paths", g.n_paths)?;
        }
        self.entropies()?;
        let [w0, w1] = self.entropy.window;
        if !(w0 >= 0.0 && w1 > w0) {
            return Err(Error::config("entropy.window", format!("needs 0 ≤ t0 < t1, got [{w0}, {w1}]")));
        }
        at_least_one("entropy.samples", self.entropy.samples)?;
        let g = &self.gauge;
        if !(g.eps_lo >= 0.0 && g.eps_hi > g.eps_lo) {
            return Err(Error::config("gauge.eps_lo", format!("needs 0 ≤ eps_lo < eps_hi, got [{}, {}]", g.eps_lo, g.eps_hi)));
        }
        if g.samples < 2 {
            return Err(Error::config("gauge.samples", "must be at least 2"));
        }
        if g.nodes < 3 || g.verify_nodes < 3 {
            return Err(Error::config("gauge.nodes", "grids need at least 3 nodes per axis"));
        }
        if let Some(n) = &self.grid.nodes {
            if n.iter().any(|&k| k < 3) {
                return Err(Error::config("grid.nodes", "grids need at least 3 nodes per axis"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::parse("experiment = \"theta-scan\"").unwrap();
        assert_eq!(c.model.name, "ou1d");
        assert_eq!(c.tolerance("certificate"), 1e-9);
        assert_eq!(c.output_dir, PathBuf::from("nibec-out"));
    }

    #[test]
    fn schema_violations_name_the_key() {
        let bad = |s: &str| match ExperimentConfig::parse(s) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert_eq!(bad("experiment = \"fp-decay\"\n[time]\ndt = -1.0"), "time.dt");
        assert_eq!(bad("experiment = \"fp-decay\"\n[tolerances]\nmean_z = 1.0"), "tolerances.mean_z");
        assert_eq!(bad("experiment = \"fp-decay\"\n[entropy]\nkinds = [\"nope\"]"), "entropy.kinds[0]");
        assert_eq!(bad("experiment = \"fp-decay\"\n[model]\nname = \"nope\""), "model.name");
        assert_eq!(bad("experiment = \"fp-decay\"\n[mc]\nseeds = 1"), "mc.seeds");
        assert_eq!(bad("experiment = \"fp-decay\"\n[mc]\nn_paths = \"many\""), "mc.n_paths");
        assert!(ExperimentConfig::parse("experiment = \"fp-decay\"\ncolour = 1").is_err());
        assert!(ExperimentConfig::parse("experiment = \"warp\"").is_err());
    }
}
