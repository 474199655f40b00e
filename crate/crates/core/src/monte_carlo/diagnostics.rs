use std::io::Write;

use crate::entropy::{evaluate_entropy, EntropyGenerator};
use crate::error::{Error, Result};
use crate::fokker_planck::DensityTrajectory;
use crate::grid::GridDensity;

use super::ratio::RatioSeries;

/// Smallest ensemble the diagnostics accept.
pub const MIN_PATHS: usize = 100;

/// `|z|` above which a drift score counts as a detection.
pub const DRIFT_Z_THRESHOLD: f64 = 4.0;

/// Backward-martingale and submartingale statistics of a [`RatioSeries`].
///
/// Per-step vectors (`drift_z`, `increment_correlation`, `ud_step_z`) have
/// one entry per record interval.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleReport {
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub mean_d: Vec<f64>,
    pub se_d: Vec<f64>,
    pub mean_ud: Vec<f64>,
    pub se_ud: Vec<f64>,
    /// `mean(ΔD)/SE(ΔD)`.
    pub drift_z: Vec<f64>,
    /// Correlation of `ΔD_k` with `D_k` across paths.
    pub increment_correlation: Vec<f64>,
    /// `mean(ΔD·h)/SE(ΔD·h)` with the bounded centred test function
    /// `h = D_k/(1+D_k) − mean`; zero in expectation for a martingale.
    pub orthogonality_z: Vec<f64>,
    /// `mean(ΔU(D))/SE(ΔU(D))` from paired differences.
    pub ud_step_z: Vec<f64>,
    /// Steps where `mean U(D)` drops by more than 2 paired SE.
    pub submartingale_violations: Vec<usize>,
    pub clamped_fraction: Vec<f64>,
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = xs.clone().sum::<f64>() / nf;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// A zero-variance statistic with zero mean is no evidence of drift.
fn z_score(mean: f64, se: f64) -> f64 {
    if se > 0.0 {
        mean / se
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * f64::INFINITY
    }
}

pub fn martingale_diagnostics(ratios: &RatioSeries, u: &EntropyGenerator) -> Result<MartingaleReport> {
    let n = ratios.n_paths;
    if n < MIN_PATHS {
        return Err(Error::DegenerateEnsemble(format!("{n} paths, need at least {MIN_PATHS}")));
    }
    let nt = ratios.n_times();
    let col = |k: usize| (0..n).map(move |p| ratios.at(p, k));
    let ucol: Vec<Vec<f64>> = (0..nt).map(|k| col(k).map(|d| u.u(d)).collect()).collect();

    let (mut mean_d, mut se_d, mut mean_ud, mut se_ud) = (vec![], vec![], vec![], vec![]);
    for (k, uk) in ucol.iter().enumerate() {
        let (m, s) = mean_se(col(k), n);
        mean_d.push(m);
        se_d.push(s);
        let (m, s) = mean_se(uk.iter().copied(), n);
        mean_ud.push(m);
        se_ud.push(s);
    }

    let (mut drift_z, mut increment_correlation, mut orthogonality_z) = (vec![], vec![], vec![]);
    let (mut ud_step_z, mut violations) = (vec![], vec![]);
    for k in 0..nt.saturating_sub(1) {
        let d0: Vec<f64> = col(k).collect();
        let dd: Vec<f64> = col(k + 1).zip(&d0).map(|(b, a)| b - a).collect();
        let (m, s) = mean_se(dd.iter().copied(), n);
        drift_z.push(z_score(m, s));
        increment_correlation.push(correlation(&dd, &d0));
        let h: Vec<f64> = d0.iter().map(|d| d / (1.0 + d)).collect();
        let hm = h.iter().sum::<f64>() / n as f64;
        let (m, s) = mean_se(dd.iter().zip(&h).map(|(a, b)| a * (b - hm)), n);
        orthogonality_z.push(z_score(m, s));
        let du = ucol[k + 1].iter().zip(&ucol[k]).map(|(b, a)| b - a);
        let (m, s) = mean_se(du, n);
        ud_step_z.push(z_score(m, s));
        if m < -2.0 * s {
            violations.push(k);
        }
    }
    Ok(MartingaleReport {
        times: ratios.times.clone(),
        n_paths: n,
        mean_d,
        se_d,
        mean_ud,
        se_ud,
        drift_z,
        increment_correlation,
        orthogonality_z,
        ud_step_z,
        submartingale_violations: violations,
        clamped_fraction: ratios.clamped_fraction.clone(),
    })
}

impl MartingaleReport {
    /// Largest `|z|` of step `k` over both drift tests.
    pub fn step_drift_z(&self, k: usize) -> f64 {
        self.drift_z[k].abs().max(self.orthogonality_z[k].abs())
    }

    pub fn max_drift_z(&self) -> f64 {
        (0..self.drift_z.len()).map(|k| self.step_drift_z(k)).fold(0.0, f64::max)
    }

    /// Largest `|mean D − 1|/SE` over all records.
    pub fn max_mean_deviation_z(&self) -> f64 {
        self.mean_d
            .iter()
            .zip(&self.se_d)
            .map(|(m, s)| z_score(m - 1.0, *s).abs())
            .fold(0.0, f64::max)
    }

    /// Columns `t, mean_D, se_D, mean_UD, se_UD, max_drift_z, clamped_fraction`;
    /// the drift column holds the score of the step ending at `t`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,mean_D,se_D,mean_UD,se_UD,max_drift_z,clamped_fraction")?;
        for k in 0..self.times.len() {
            let z = if k == 0 { 0.0 } else { self.step_drift_z(k - 1) };
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.times[k], self.mean_d[k], self.se_d[k], self.mean_ud[k], self.se_ud[k], z, self.clamped_fraction[k]
            )?;
        }
        Ok(())
    }
}

/// Monte Carlo entropy `E[U(D_k)]` against the grid value `H_U(p_{T−t_k}|p_∞)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyConsistency {
    pub times: Vec<f64>,
    pub mc: Vec<f64>,
    pub mc_se: Vec<f64>,
    /// `sqrt(Var_{p_∞}[U(ρ)]/n)` by quadrature. Heavy-tailed `U(D)` makes
    /// the sample SE an underestimate, so the larger of the two is used.
    pub quadrature_se: Vec<f64>,
    pub grid: Vec<f64>,
    /// Quadrature error estimate of the grid value.
    pub grid_err: Vec<f64>,
    /// `|mc − grid| / sqrt(max(se, quadrature_se)² + err²)`.
    pub z: Vec<f64>,
}

impl EntropyConsistency {
    pub fn max_z(&self) -> f64 {
        self.z.iter().copied().fold(0.0, f64::max)
    }
}

/// `∫ U(p/q)² q` on the grid.
fn second_moment(p: &GridDensity, q: &GridDensity, u: &EntropyGenerator) -> f64 {
    let sum: f64 = p
        .values()
        .iter()
        .zip(q.values())
        .filter(|(_, &qi)| qi > 0.0)
        .map(|(&pi, &qi)| u.u(pi / qi).powi(2) * qi)
        .sum();
    sum * p.grid().cell_volume()
}

pub fn entropy_consistency(
    report: &MartingaleReport,
    ptraj: &DensityTrajectory,
    pinf: &GridDensity,
    u: &EntropyGenerator,
) -> Result<EntropyConsistency> {
    let t_end = *report.times.last().expect("reports hold at least one time");
    let mut out = EntropyConsistency {
        times: report.times.clone(),
        mc: report.mean_ud.clone(),
        mc_se: report.se_ud.clone(),
        quadrature_se: vec![],
        grid: vec![],
        grid_err: vec![],
        z: vec![],
    };
    for (k, &t) in report.times.iter().enumerate() {
        let p = ptraj
            .at_time(t_end - t)
            .ok_or_else(|| Error::TimeMismatch(format!("no density snapshot at t = {}", t_end - t)))?;
        let r = evaluate_entropy(p, pinf, u)?;
        let (h, err) = (r.value, r.quadrature_error_estimate);
        let qse = (second_moment(p, pinf, u) - h * h).max(0.0).sqrt() / (report.n_paths as f64).sqrt();
        let tot = (report.se_ud[k].max(qse).powi(2) + err * err).sqrt();
        out.quadrature_se.push(qse);
        out.grid.push(h);
        out.grid_err.push(err);
        out.z.push(z_score((report.mean_ud[k] - h).abs(), tot));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::EntropyKind;
    use crate::monte_carlo::ratio::RatioSource;

    fn series(values: Vec<f64>, n_paths: usize, n_times: usize) -> RatioSeries {
        RatioSeries {
            times: (0..n_times).map(|k| k as f64).collect(),
            n_paths,
            values,
            hit_zero_index: vec![None; n_paths],
            clamped_fraction: vec![0.0; n_times],
            source: RatioSource::DensityRatio,
        }
    }

    #[test]
    fn constant_ratio_is_a_clean_martingale() {
        let r = series(vec![1.0; 200 * 5], 200, 5);
        let u = EntropyGenerator::builtin(EntropyKind::Chi2).unwrap();
        let rep = martingale_diagnostics(&r, &u).unwrap();
        assert_eq!(rep.max_drift_z(), 0.0);
        assert!(rep.mean_ud.iter().all(|&v| v == 0.0));
        assert!(rep.submartingale_violations.is_empty());
    }

    #[test]
    fn small_ensembles_are_rejected() {
        let r = series(vec![1.0; 50 * 3], 50, 3);
        let u = EntropyGenerator::builtin(EntropyKind::Kl).unwrap();
        assert!(matches!(martingale_diagnostics(&r, &u), Err(Error::DegenerateEnsemble(_))));
    }

    #[test]
    fn a_drifting_series_is_flagged() {
        let n = 400;
        let values: Vec<f64> = (0..n).flat_map(|p| (0..4).map(move |k| 1.0 + 0.1 * k as f64 + 0.01 * ((p * 7 + k) % 13) as f64)).collect();
        let u = EntropyGenerator::builtin(EntropyKind::Chi2).unwrap();
        let rep = martingale_diagnostics(&series(values, n, 4), &u).unwrap();
        assert!(rep.max_drift_z() > DRIFT_Z_THRESHOLD);
        assert!(rep.max_mean_deviation_z() > 3.0);
    }
}
