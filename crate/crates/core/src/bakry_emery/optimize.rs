//! One-parameter search over gauge families: a coarse sweep followed by
//! golden-section refinement around the best sample.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::DiffusionModel;

use super::criterion::inf_lambda_on_grid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub samples: usize,
    /// Geometric instead of uniform spacing of the sweep (needs `eps_lo > 0`).
    pub log_spacing: bool,
    pub golden_iterations: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { eps_lo: 0.01, eps_hi: 0.3, samples: 12, log_spacing: false, golden_iterations: 12 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeOptimum {
    pub best_eps: f64,
    pub best_lambda: f64,
    /// Every evaluated `(ε, inf λ)`, sorted by ε.
    pub curve: Vec<(f64, f64)>,
}

impl GaugeOptimum {
    /// Columns `eps, inf_lambda`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "eps,inf_lambda")?;
        for (e, l) in &self.curve {
            writeln!(w, "{e},{l}")?;
        }
        Ok(())
    }
}

fn sweep_points(o: &SweepOptions) -> Result<Vec<f64>> {
    if !(o.eps_lo < o.eps_hi) || o.samples < 2 || !o.eps_lo.is_finite() || !o.eps_hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sweep needs eps_lo < eps_hi and at least 2 samples, got [{}, {}] with {}",
            o.eps_lo, o.eps_hi, o.samples
        )));
    }
    if o.log_spacing && o.eps_lo <= 0.0 {
        return Err(Error::InvalidParameter("geometric sweep needs eps_lo > 0".into()));
    }
    let n = o.samples - 1;
    Ok((0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            if o.log_spacing {
                o.eps_lo * (o.eps_hi / o.eps_lo).powf(t)
            } else {
                o.eps_lo + (o.eps_hi - o.eps_lo) * t
            }
        })
        .collect())
}

/// Maximizes `ε ↦ min over grids(ε) of inf λ(model(ε))`.
///
/// `grids` may depend on ε, e.g. to refine around a gauge whose scale is ε.
pub fn optimize_gauge_rate<M, F, G>(family: F, grids: G, opts: &SweepOptions) -> Result<GaugeOptimum>
where
    M: DiffusionModel,
    F: Fn(f64) -> Result<M>,
    G: Fn(f64) -> Result<Vec<GridSpec>>,
{
    let eval = |eps: f64| -> Result<f64> {
        let model = family(eps)?;
        let mut inf = f64::INFINITY;
        for g in grids(eps)? {
            inf = inf.min(inf_lambda_on_grid(&model, &g)?.0);
        }
        Ok(inf)
    };
    let mut curve = Vec::new();
    for eps in sweep_points(opts)? {
        curve.push((eps, eval(eps)?));
    }
    let best = curve.iter().enumerate().fold(0, |b, (i, p)| if p.1 > curve[b].1 { i } else { b });
    let lo = curve[best.saturating_sub(1)].0;
    let hi = curve[(best + 1).min(curve.len() - 1)].0;
    if opts.golden_iterations > 0 && hi > lo {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let mut fc = eval(c)?;
        let mut fd = eval(d)?;
        curve.push((c, fc));
        curve.push((d, fd));
        for _ in 0..opts.golden_iterations {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = eval(c)?;
                curve.push((c, fc));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = eval(d)?;
                curve.push((d, fd));
            }
        }
    }
    curve.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (best_eps, best_lambda) = curve.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |b, p| if p.1 > b.1 { p } else { b });
    Ok(GaugeOptimum { best_eps, best_lambda, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_ou;

    #[test]
    fn inert_family_gives_a_flat_curve() {
        let grid = GridSpec::cube(1, -3.0, 3.0, 33).unwrap();
        let opt = optimize_gauge_rate(
            |_eps| build_ou(1, 1.0, 1.0),
            |_eps| Ok(vec![grid.clone()]),
            &SweepOptions { golden_iterations: 4, ..Default::default() },
        )
        .unwrap();
        assert!(opt.curve.iter().all(|p| (p.1 - 1.0).abs() < 1e-12));
        assert!((opt.best_lambda - 1.0).abs() < 1e-12);
        assert_eq!(opt.curve.len(), 12 + 2 + 4);
    }

    #[test]
    fn rejects_bad_ranges() {
        let o = SweepOptions { eps_lo: 0.0, log_spacing: true, ..Default::default() };
        assert!(sweep_points(&o).is_err());
        let o = SweepOptions { eps_lo: 0.3, eps_hi: 0.1, ..Default::default() };
        assert!(sweep_points(&o).is_err());
    }
}
