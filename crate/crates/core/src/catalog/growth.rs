//! Sphere probes of the growth ratios `ΔV/|∇V|²`, `−x·∇V/|x|²` and
//! `√(∂_ik V ∂_ik V)/V` at increasing radii.

use crate::error::{Error, Result};
use crate::linalg::Vector;

use super::potentials::Potential;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    /// Non-increasing and at least halved between the first and last radius.
    Vanishing,
    Bounded,
    /// Increasing overall by more than 50%.
    Growing,
}

fn classify(values: &[f64]) -> Trend {
    let (first, last) = (values[0], *values.last().unwrap());
    let non_increasing = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    if non_increasing && last.abs() <= 0.5 * first.abs() {
        Trend::Vanishing
    } else if last > 1.5 * first.max(0.0) && last > first + 1e-12 {
        Trend::Growing
    } else {
        Trend::Bounded
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    pub radii: Vec<f64>,
    pub laplacian_ratio: Vec<f64>,
    pub radial_drift: Vec<f64>,
    pub hessian_ratio: Vec<f64>,
    pub laplacian_trend: Trend,
    pub radial_trend: Trend,
    pub hessian_trend: Trend,
}

impl GrowthReport {
    /// The three limsup conditions look satisfied along the probed radii.
    pub fn looks_admissible(&self) -> bool {
        self.laplacian_trend == Trend::Vanishing
            && self.radial_trend != Trend::Growing
            && self.hessian_trend == Trend::Vanishing
    }
}

/// Maxima over 360 angular samples (two points in 1-D) per radius.
pub fn probe_growth_conditions(v: &dyn Potential, radii: &[f64]) -> Result<GrowthReport> {
    if radii.len() < 2 || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::InvalidParameter("radii must be positive and strictly increasing".into()));
    }
    let d = v.dim();
    let directions: Vec<Vector> = match d {
        1 => vec![Vector::from_slice(&[1.0]), Vector::from_slice(&[-1.0])],
        2 => (0..360)
            .map(|k| {
                let t = (k as f64 + 0.5) * std::f64::consts::TAU / 360.0;
                Vector::from_slice(&[t.cos(), t.sin()])
            })
            .collect(),
        _ => return Err(Error::Unsupported("growth probes support d = 1 or 2".into())),
    };
    let mut lap = Vec::new();
    let mut rad = Vec::new();
    let mut hes = Vec::new();
    for &r in radii {
        let (mut l, mut q, mut h) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for u in &directions {
            let x = u.scale(r);
            let g = v.gradient(&x);
            let hm = v.hessian(&x);
            let val = v.value(&x);
            l = l.max(hm.trace() / g.dot(&g));
            q = q.max(-x.dot(&g) / (r * r));
            let frob: f64 = (0..d).flat_map(|i| (0..d).map(move |k| (i, k))).map(|(i, k)| hm[(i, k)].powi(2)).sum();
            h = h.max(frob.sqrt() / val);
        }
        lap.push(l);
        rad.push(q);
        hes.push(h);
    }
    Ok(GrowthReport {
        radii: radii.to_vec(),
        laplacian_trend: classify(&lap),
        radial_trend: classify(&rad),
        hessian_trend: classify(&hes),
        laplacian_ratio: lap,
        radial_drift: rad,
        hessian_ratio: hes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::potentials::{ExpQuadraticPotential, QuadraticPotential};

    #[test]
    fn quadratic_laplacian_ratio_closed_form() {
        let rep = probe_growth_conditions(&QuadraticPotential { d: 2, c: 1.0 }, &[1.0, 2.0, 4.0]).unwrap();
        for (r, l) in rep.radii.iter().zip(&rep.laplacian_ratio) {
            assert!((l - 2.0 / (2.0 * r * r)).abs() < 1e-12);
        }
        assert!(rep.looks_admissible());
    }

    #[test]
    fn exponential_potential_is_flagged() {
        let rep = probe_growth_conditions(&ExpQuadraticPotential { d: 2 }, &[0.5, 1.0, 1.5]).unwrap();
        assert_eq!(rep.hessian_trend, Trend::Growing);
        assert!(!rep.looks_admissible());
    }
}
