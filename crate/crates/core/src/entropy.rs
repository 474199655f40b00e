//! Convex entropies `H_U(p|q) = ∫ U(p/q) q`, the U-Fisher information and
//! total variation on grid densities.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, GridDensity, GridSpec};
use crate::model::DiffusionModel;

/// Ratios at or below this value are treated as `ρ = 0` in the Fisher integral.
pub const RATIO_FLOOR: f64 = 1e-14;

/// Relative slack allowed in the H7' inequality.
pub const H7_PRIME_SLACK: f64 = 1e-12;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EntropyKind {
    Kl,
    Chi2,
    Tv,
    Power(f64),
}

impl EntropyKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(EntropyKind::Kl),
            "chi2" => Ok(EntropyKind::Chi2),
            "tv" => Ok(EntropyKind::Tv),
            other => {
                let beta = other
                    .strip_prefix("power(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|b| b.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!("unknown entropy kind `{other}`"))
                    })?;
                Ok(EntropyKind::Power(beta))
            }
        }
    }
}

/// Convex `U` on `[0, ∞)` with derivatives up to order four where available.
#[derive(Clone)]
pub struct EntropyGenerator {
    name: String,
    u: ScalarFn,
    derivatives: [Option<ScalarFn>; 4],
    u_at_zero: f64,
    delta_u_zero: f64,
}

impl fmt::Debug for EntropyGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EntropyGenerator")
            .field("name", &self.name)
            .field("max_order", &self.max_order())
            .field("u_at_zero", &self.u_at_zero)
            .finish()
    }
}

pub fn scalar_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Option<ScalarFn> {
    Some(Arc::new(f))
}

impl EntropyGenerator {
    /// A user-supplied generator; `derivatives[k]` is the derivative of
    /// order `k + 1`.
    pub fn custom(
        name: impl Into<String>,
        u: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivatives: [Option<ScalarFn>; 4],
    ) -> Self {
        let u: ScalarFn = Arc::new(u);
        let u_at_zero = u(0.0);
        let delta_u_zero = u(f64::MIN_POSITIVE) - u_at_zero;
        Self { name: name.into(), u, derivatives, u_at_zero, delta_u_zero: delta_u_zero.min(0.0) }
    }

    pub fn builtin(kind: EntropyKind) -> Result<Self> {
        let g = match kind {
            EntropyKind::Kl => Self {
                name: "kl".into(),
                u: Arc::new(|r: f64| if r > 0.0 { r * r.ln() - (r - 1.0) } else { 1.0 }),
                derivatives: [
                    scalar_fn(|r: f64| r.ln()),
                    scalar_fn(|r: f64| 1.0 / r),
                    scalar_fn(|r: f64| -1.0 / (r * r)),
                    scalar_fn(|r: f64| 2.0 / (r * r * r)),
                ],
                u_at_zero: 1.0,
                delta_u_zero: 0.0,
            },
            EntropyKind::Chi2 => Self {
                name: "chi2".into(),
                u: Arc::new(|r: f64| (r - 1.0) * (r - 1.0)),
                derivatives: [
                    scalar_fn(|r: f64| 2.0 * (r - 1.0)),
                    scalar_fn(|_| 2.0),
                    scalar_fn(|_| 0.0),
                    scalar_fn(|_| 0.0),
                ],
                u_at_zero: 1.0,
                delta_u_zero: 0.0,
            },
            EntropyKind::Tv => Self {
                name: "tv".into(),
                u: Arc::new(|r: f64| (r - 1.0).abs()),
                derivatives: [scalar_fn(|r: f64| sign_tilde(r - 1.0)), None, None, None],
                u_at_zero: 1.0,
                delta_u_zero: 0.0,
            },
            EntropyKind::Power(beta) => {
                if !(beta > 1.0 && beta <= 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power entropy needs β in (1, 2], got {beta}"
                    )));
                }
                let c = 1.0 / (beta * (beta - 1.0));
                Self {
                    name: format!("power({beta})"),
                    u: Arc::new(move |r: f64| c * (r.max(0.0).powf(beta) - 1.0 - beta * (r - 1.0))),
                    derivatives: [
                        scalar_fn(move |r: f64| (r.powf(beta - 1.0) - 1.0) / (beta - 1.0)),
                        scalar_fn(move |r: f64| r.powf(beta - 2.0)),
                        scalar_fn(move |r: f64| (beta - 2.0) * r.powf(beta - 3.0)),
                        scalar_fn(move |r: f64| (beta - 2.0) * (beta - 3.0) * r.powf(beta - 4.0)),
                    ],
                    u_at_zero: 1.0 / beta,
                    delta_u_zero: 0.0,
                }
            }
        };
        Ok(g)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn u(&self, r: f64) -> f64 {
        if r == 0.0 {
            self.u_at_zero
        } else {
            (self.u)(r)
        }
    }

    pub fn u_at_zero(&self) -> f64 {
        self.u_at_zero
    }

    pub fn delta_u_zero(&self) -> f64 {
        self.delta_u_zero
    }

    /// Highest derivative order available.
    pub fn max_order(&self) -> usize {
        self.derivatives.iter().take_while(|d| d.is_some()).count()
    }

    pub fn derivative(&self, order: usize, r: f64) -> Option<f64> {
        match order {
            0 => Some(self.u(r)),
            1..=4 => self.derivatives[order - 1].as_ref().map(|f| f(r)),
            _ => None,
        }
    }

    pub fn require(&self, order: usize) -> Result<()> {
        if self.max_order() >= order {
            Ok(())
        } else {
            Err(Error::MissingDerivative { entropy: self.name.clone(), order })
        }
    }

    fn nth(&self, order: usize) -> Result<&ScalarFn> {
        self.derivatives[order - 1]
            .as_ref()
            .ok_or_else(|| Error::MissingDerivative { entropy: self.name.clone(), order })
    }

    pub fn d2u(&self, r: f64) -> Result<f64> {
        Ok(self.nth(2)?(r))
    }
}

/// `sign~(r)`: the sign function with `sign~(0) = 0`.
pub fn sign_tilde(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    /// `U(1) = U'(1) = 0` and `U'' ≥ 0` on the samples.
    pub h7_ok: bool,
    pub h7prime_ok: bool,
    /// Minimum over samples of `½ U'' U⁽⁴⁾ − (U⁽³⁾)²`.
    pub worst_margin: f64,
    /// The same margin divided by `max(1, (U⁽³⁾)²)`.
    pub worst_relative_margin: f64,
}

pub fn check_admissibility(u: &EntropyGenerator, r_samples: &[f64]) -> AdmissibilityReport {
    let d1 = u.derivative(1, 1.0).unwrap_or(f64::NAN);
    let mut h7_ok = u.u(1.0).abs() < 1e-12 && d1.abs() < 1e-12;
    let mut worst = f64::INFINITY;
    let mut worst_rel = f64::INFINITY;
    let mut h7prime_ok = true;
    for &r in r_samples {
        match u.derivative(2, r) {
            Some(d2) if d2 >= -1e-12 => {}
            _ => h7_ok = false,
        }
        match (u.derivative(2, r), u.derivative(3, r), u.derivative(4, r)) {
            (Some(d2), Some(d3), Some(d4)) => {
                let margin = 0.5 * d2 * d4 - d3 * d3;
                let scale = (d3 * d3).max(1.0);
                worst = worst.min(margin);
                worst_rel = worst_rel.min(margin / scale);
                if margin < -H7_PRIME_SLACK * scale {
                    h7prime_ok = false;
                }
            }
            _ => {
                h7prime_ok = false;
                worst = f64::NAN;
                worst_rel = f64::NAN;
            }
        }
    }
    AdmissibilityReport { h7_ok, h7prime_ok, worst_margin: worst, worst_relative_margin: worst_rel }
}

/// Quadrature value with a Richardson-type error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarResult {
    pub value: f64,
    pub quadrature_error_estimate: f64,
    pub infinite: bool,
    pub mass_defect: bool,
}

impl ScalarResult {
    fn finite(value: f64, coarse: Option<f64>, mass_defect: bool) -> Self {
        let err = coarse.map_or(0.0, |c| ((value - c) / 3.0).abs());
        Self { value, quadrature_error_estimate: err, infinite: false, mass_defect }
    }

    fn infinite(mass_defect: bool) -> Self {
        Self { value: f64::INFINITY, quadrature_error_estimate: 0.0, infinite: true, mass_defect }
    }
}

fn mass_defect(p: &GridDensity, q: &GridDensity) -> bool {
    (p.mass() - 1.0).abs() > 1e-6 || (q.mass() - 1.0).abs() > 1e-6
}

fn entropy_sum(grid: &GridSpec, p: &[f64], q: &[f64], u: &EntropyGenerator) -> Option<f64> {
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if qi > 0.0 {
            sum += u.u(pi / qi) * qi;
        } else if pi > 0.0 {
            return None;
        }
    }
    Some(sum * grid.cell_volume())
}

/// Midpoint rule for `Σ U(p_i/q_i) q_i ΔV`.
pub fn evaluate_entropy(p: &GridDensity, q: &GridDensity, u: &EntropyGenerator) -> Result<ScalarResult> {
    ensure_same_grid(p, q)?;
    let defect = mass_defect(p, q);
    let grid = p.grid();
    let Some(fine) = entropy_sum(grid, p.values(), q.values(), u) else {
        return Ok(ScalarResult::infinite(defect));
    };
    let coarse = grid.restrict_to_coarse(p.values()).and_then(|(cg, pc)| {
        let (_, qc) = grid.restrict_to_coarse(q.values())?;
        entropy_sum(&cg, &pc, &qc, u)
    });
    Ok(ScalarResult::finite(fine, coarse, defect))
}

fn ratio_field(p: &[f64], q: &[f64]) -> Vec<f64> {
    p.iter().zip(q).map(|(&pi, &qi)| if qi > 0.0 { pi / qi } else { 0.0 }).collect()
}

fn fisher_sum(
    grid: &GridSpec,
    p: &[f64],
    q: &[f64],
    model: &dyn DiffusionModel,
    d2u: &ScalarFn,
) -> f64 {
    let rho = ratio_field(p, q);
    let mut sum = 0.0;
    for i in 0..grid.len() {
        if rho[i] <= RATIO_FLOOR || q[i] <= 0.0 {
            continue;
        }
        let g = grid.nodal_gradient(&rho, i);
        let a = model.diffusion_matrix(&grid.node(i));
        sum += 0.5 * d2u(rho[i]) * a.quad_form(&g) * q[i];
    }
    sum * grid.cell_volume()
}

/// `½ Σ U''(ρ) ∇ρ* a ∇ρ q ΔV` with `ρ = p/q`.
pub fn evaluate_fisher(
    p: &GridDensity,
    q: &GridDensity,
    model: &dyn DiffusionModel,
    u: &EntropyGenerator,
) -> Result<ScalarResult> {
    ensure_same_grid(p, q)?;
    let d2u = u.nth(2)?;
    if model.dim() != p.grid().dim() {
        return Err(Error::GridMismatch(format!(
            "model dimension {} on a {}-d grid",
            model.dim(),
            p.grid().dim()
        )));
    }
    let grid = p.grid();
    let fine = fisher_sum(grid, p.values(), q.values(), model, d2u);
    let coarse = grid.restrict_to_coarse(p.values()).and_then(|(cg, pc)| {
        let (_, qc) = grid.restrict_to_coarse(q.values())?;
        Some(fisher_sum(&cg, &pc, &qc, model, d2u))
    });
    Ok(ScalarResult::finite(fine, coarse, mass_defect(p, q)))
}

fn l1_sum(grid: &GridSpec, p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.cell_volume()
}

/// Unhalved `∫|p − q|`, equal to `H_U` for `U(r) = |r − 1|`.
pub fn total_variation(p: &GridDensity, q: &GridDensity) -> Result<ScalarResult> {
    ensure_same_grid(p, q)?;
    let grid = p.grid();
    let fine = l1_sum(grid, p.values(), q.values());
    let coarse = grid.restrict_to_coarse(p.values()).and_then(|(cg, pc)| {
        let (_, qc) = grid.restrict_to_coarse(q.values())?;
        Some(l1_sum(&cg, &pc, &qc))
    });
    Ok(ScalarResult::finite(fine, coarse, mass_defect(p, q)))
}

/// Logarithmic mean, the face value of `q` under exponential fitting.
pub(crate) fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let r = b / a;
    if (r - 1.0).abs() < 1e-6 {
        // series of (r − 1)/ln r around r = 1
        let e = r - 1.0;
        a * (1.0 + e / 2.0 - e * e / 12.0)
    } else {
        (b - a) / r.ln()
    }
}

fn tv_rhs_sum(grid: &GridSpec, p: &[f64], q: &[f64], model: &dyn DiffusionModel) -> f64 {
    let rho = ratio_field(p, q);
    let d = grid.dim();
    let mut div = vec![0.0; grid.len()];
    for axis in 0..d {
        let h = grid.spacing(axis);
        for i in 0..grid.len() {
            let idx = grid.multi_index(i);
            if idx[axis] + 1 == grid.nodes_per_axis()[axis] {
                continue;
            }
            let mut jdx = idx;
            jdx[axis] += 1;
            let j = grid.flat_index(&jdx[..d]);
            let mut face = grid.node(i);
            face[axis] += 0.5 * h;
            let a = model.diffusion_matrix(&face)[(axis, axis)];
            let flux = a * (rho[j] - rho[i]) / h * log_mean(q[i], q[j]);
            div[i] += flux / h;
            div[j] -= flux / h;
        }
    }
    let sum: f64 = (0..grid.len()).map(|i| sign_tilde(rho[i] - 1.0) * div[i]).sum();
    0.5 * sum * grid.cell_volume()
}

/// `½ ∫ sign~(ρ − 1) ∇·(a ∇ρ q)` with face fluxes weighted by the logarithmic
/// mean of `q`, the same weighting the Fokker–Planck solver uses.
pub fn tv_dissipation_rhs(
    p: &GridDensity,
    q: &GridDensity,
    model: &dyn DiffusionModel,
) -> Result<ScalarResult> {
    ensure_same_grid(p, q)?;
    let grid = p.grid();
    crate::fokker_planck::require_diagonal(model, grid)?;
    let fine = tv_rhs_sum(grid, p.values(), q.values(), model);
    let coarse = grid.restrict_to_coarse(p.values()).and_then(|(cg, pc)| {
        let (_, qc) = grid.restrict_to_coarse(q.values())?;
        Some(tv_rhs_sum(&cg, &pc, &qc, model))
    });
    Ok(ScalarResult::finite(fine, coarse, mass_defect(p, q)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let kl = EntropyGenerator::builtin(EntropyKind::Kl).unwrap();
        assert_eq!(kl.u(1.0), 0.0);
        assert!((kl.d2u(4.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(kl.u(0.0), 1.0);
        let chi2 = EntropyGenerator::builtin(EntropyKind::Chi2).unwrap();
        assert_eq!(chi2.derivative(2, 3.0), Some(2.0));
        assert_eq!(chi2.derivative(4, 3.0), Some(0.0));
        let tv = EntropyGenerator::builtin(EntropyKind::Tv).unwrap();
        assert_eq!(tv.max_order(), 1);
        assert!(tv.d2u(1.0).is_err());
        assert!(EntropyGenerator::builtin(EntropyKind::Power(2.5)).is_err());
        assert!(EntropyGenerator::builtin(EntropyKind::Power(1.0)).is_err());
    }

    #[test]
    fn power_two_is_half_chi2() {
        let p = EntropyGenerator::builtin(EntropyKind::Power(2.0)).unwrap();
        for r in [0.0, 0.3, 1.0, 2.5] {
            assert!((p.u(r) - 0.5 * (r - 1.0) * (r - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn admissibility_examples() {
        let chi2 = EntropyGenerator::builtin(EntropyKind::Chi2).unwrap();
        let rep = check_admissibility(&chi2, &[0.1, 1.0, 10.0]);
        assert!(rep.h7_ok && rep.h7prime_ok);
        assert_eq!(rep.worst_margin, 0.0);

        let kl = EntropyGenerator::builtin(EntropyKind::Kl).unwrap();
        let rep = check_admissibility(&kl, &[0.5, 1.0, 2.0]);
        assert!(rep.h7prime_ok);
        assert!(rep.worst_margin.abs() < 1e-14);

        let quartic = EntropyGenerator::custom(
            "quartic",
            |r| (r - 1.0).powi(4),
            [
                scalar_fn(|r| 4.0 * (r - 1.0).powi(3)),
                scalar_fn(|r| 12.0 * (r - 1.0).powi(2)),
                scalar_fn(|r| 24.0 * (r - 1.0)),
                scalar_fn(|_| 24.0),
            ],
        );
        let rep = check_admissibility(&quartic, &[2.0]);
        assert!(!rep.h7prime_ok);
        assert!((rep.worst_margin - (144.0 - 576.0)).abs() < 1e-12);
    }

    #[test]
    fn parse_kinds() {
        assert_eq!(EntropyKind::parse("kl").unwrap(), EntropyKind::Kl);
        assert_eq!(EntropyKind::parse("power(1.5)").unwrap(), EntropyKind::Power(1.5));
        assert!(EntropyKind::parse("renyi").is_err());
    }

    #[test]
    fn log_mean_is_continuous_at_equal_arguments() {
        let a = log_mean(2.0, 2.0 * (1.0 + 1e-7));
        let b = log_mean(2.0, 2.0 * (1.0 + 2e-6));
        assert!((a - 2.0).abs() < 1e-6 && (b - 2.0).abs() < 1e-5);
        assert!((log_mean(1.0, std::f64::consts::E) - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }
}
