//! Potentials `V` and the reversible model `dX = dW − ∇V dt`, `p_∞ ∝ e^{−2V}`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Tensor3, Tensor4, Vector};
use crate::model::DiffusionModel;

pub trait Potential: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vector;
    fn hessian(&self, x: &[f64]) -> Matrix;
}

/// `sign(s)|s|^p`.
fn spow(s: f64, p: f64) -> f64 {
    s.signum() * s.abs().powf(p)
}

/// `V(x) = x₁² + |x₁ − x₂|^{2+α} + |x₂|^{2+α}`.
#[derive(Clone, Copy, Debug)]
pub struct Example1Potential {
    pub alpha: f64,
}

impl Example1Potential {
    pub fn curvature_coefficient(&self) -> f64 {
        (2.0 + self.alpha) * (1.0 + self.alpha)
    }

    /// `(κ₁, κ₂) = c(|x₁ − x₂|^α, |x₂|^α)` with `c = (2+α)(1+α)`.
    pub fn kappas(&self, x: &[f64]) -> (f64, f64) {
        let c = self.curvature_coefficient();
        (c * (x[0] - x[1]).abs().powf(self.alpha), c * x[1].abs().powf(self.alpha))
    }
}

impl Potential for Example1Potential {
    fn name(&self) -> String {
        format!("example1-potential(alpha={})", self.alpha)
    }
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        let p = 2.0 + self.alpha;
        x[0] * x[0] + (x[0] - x[1]).abs().powf(p) + x[1].abs().powf(p)
    }
    fn gradient(&self, x: &[f64]) -> Vector {
        let p = 2.0 + self.alpha;
        let d = spow(x[0] - x[1], 1.0 + self.alpha);
        Vector::from_slice(&[2.0 * x[0] + p * d, p * spow(x[1], 1.0 + self.alpha) - p * d])
    }
    fn hessian(&self, x: &[f64]) -> Matrix {
        let (k1, k2) = self.kappas(x);
        Matrix::from_rows(&[&[2.0 + k1, -k1], &[-k1, k2 + k1]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HessianEigen {
    pub gamma_minus: f64,
    /// `min(κ₂, 2)`.
    pub lower_bound: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

/// Smallest eigenvalue of the example-1 Hessian,
/// `γ₋ = 1 + κ₁ + κ₂/2 − √(1 + κ₁² − κ₂ + κ₂²/4)`.
pub fn hessian_min_eigen(alpha: f64, x: &[f64]) -> HessianEigen {
    let (k1, k2) = Example1Potential { alpha }.kappas(x);
    let disc = 1.0 + k1 * k1 - k2 + 0.25 * k2 * k2;
    HessianEigen {
        gamma_minus: 1.0 + k1 + 0.5 * k2 - disc.max(0.0).sqrt(),
        lower_bound: k2.min(2.0),
        kappa1: k1,
        kappa2: k2,
    }
}

/// Lower bound for `λ_min(∇²V)` of example 1 outside `[−L, L]²`.
///
/// There `|x₂| + |x₁ − x₂| ≥ L`, so `κ₁ + κ₂ ≥ S := c L^α`, and the smallest
/// eigenvalue of `diag(2, κ₂) + κ₁[[1, −1], [−1, 1]]` over `κ₁ + κ₂ ≥ S` is
/// at least `S / (1 + S)`.
pub fn example1_tail_bound(alpha: f64, half_width: f64) -> f64 {
    let s = Example1Potential { alpha }.curvature_coefficient() * half_width.powf(alpha);
    s / (1.0 + s)
}

/// Convex `v` with `v = 0` on `[−¼, ¼]` and `v'' = 2` off `(−½, ½)`;
/// `v''` follows a cubic smoothstep in between, so `v` is piecewise quintic.
pub fn ramp_profile(s: f64) -> (f64, f64, f64) {
    let a = s.abs();
    let sg = s.signum();
    if a <= 0.25 {
        (0.0, 0.0, 0.0)
    } else if a <= 0.5 {
        let u = 4.0 * (a - 0.25);
        let v2 = 2.0 * u * u * (3.0 - 2.0 * u);
        let v1 = 0.5 * (u.powi(3) - 0.5 * u.powi(4));
        let v0 = 0.125 * (0.25 * u.powi(4) - 0.1 * u.powi(5));
        (v0, sg * v1, v2)
    } else {
        let e = a - 0.5;
        (0.01875 + 0.25 * e + e * e, sg * (0.25 + 2.0 * e), 2.0)
    }
}

/// `V_ε(x) = x₁² + v_ε(x₂) + v_ε(x₁ − x₂)` with `v_ε(s) = ε² v(s/ε)`.
#[derive(Clone, Copy, Debug)]
pub struct Example2Potential {
    pub eps: f64,
}

impl Example2Potential {
    fn v_eps(&self, s: f64) -> (f64, f64, f64) {
        let e = self.eps;
        let (v, v1, v2) = ramp_profile(s / e);
        (e * e * v, e * v1, v2)
    }
}

impl Potential for Example2Potential {
    fn name(&self) -> String {
        format!("example2-potential(eps={})", self.eps)
    }
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[0] * x[0] + self.v_eps(x[1]).0 + self.v_eps(x[0] - x[1]).0
    }
    fn gradient(&self, x: &[f64]) -> Vector {
        let (_, a1, _) = self.v_eps(x[1]);
        let (_, c1, _) = self.v_eps(x[0] - x[1]);
        Vector::from_slice(&[2.0 * x[0] + c1, a1 - c1])
    }
    fn hessian(&self, x: &[f64]) -> Matrix {
        let (_, _, a2) = self.v_eps(x[1]);
        let (_, _, c2) = self.v_eps(x[0] - x[1]);
        Matrix::from_rows(&[&[2.0 + c2, -c2], &[-c2, a2 + c2]])
    }
}

/// Outside the gauge support of example 2, `Θ = ∇²V_ε ⪰ (3 − √5) I`.
pub fn example2_tail_bound() -> f64 {
    3.0 - 5f64.sqrt()
}

/// `V(x) = c|x|²`.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticPotential {
    pub d: usize,
    pub c: f64,
}

impl Potential for QuadraticPotential {
    fn name(&self) -> String {
        format!("quadratic(d={}, c={})", self.d, self.c)
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.c * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn gradient(&self, x: &[f64]) -> Vector {
        Vector::from_fn(self.d, |i| 2.0 * self.c * x[i])
    }
    fn hessian(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(self.d).scale(2.0 * self.c)
    }
}

/// `V(x) = exp(|x|²)`, whose Hessian outgrows `V`'s logarithm but not `V`.
#[derive(Clone, Copy, Debug)]
pub struct ExpQuadraticPotential {
    pub d: usize,
}

impl Potential for ExpQuadraticPotential {
    fn name(&self) -> String {
        format!("exp-quadratic(d={})", self.d)
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().exp()
    }
    fn gradient(&self, x: &[f64]) -> Vector {
        let e = self.value(x);
        Vector::from_fn(self.d, |i| 2.0 * x[i] * e)
    }
    fn hessian(&self, x: &[f64]) -> Matrix {
        let e = self.value(x);
        Matrix::from_fn(self.d, self.d, |i, j| {
            e * (4.0 * x[i] * x[j] + if i == j { 2.0 } else { 0.0 })
        })
    }
}

/// `b = −∇V`, `σ = I`, `log p_∞ = −2V`.
pub struct GradientModel {
    potential: Arc<dyn Potential>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl GradientModel {
    pub fn new(potential: Arc<dyn Potential>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let d = potential.dim();
        if lo.len() != d || hi.len() != d {
            return Err(Error::InvalidParameter("box dimension does not match potential".into()));
        }
        Ok(Self { potential, lo, hi })
    }

    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }
}

impl DiffusionModel for GradientModel {
    fn name(&self) -> String {
        format!("gradient({})", self.potential.name())
    }
    fn dim(&self) -> usize {
        self.potential.dim()
    }
    fn drift(&self, x: &[f64]) -> Vector {
        self.potential.gradient(x).scale(-1.0)
    }
    fn drift_jacobian(&self, x: &[f64]) -> Matrix {
        self.potential.hessian(x).scale(-1.0)
    }
    fn sigma(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(self.dim())
    }
    fn sigma_derivative(&self, _x: &[f64]) -> Tensor3 {
        let d = self.dim();
        Tensor3::zeros(d, d, d)
    }
    fn sigma_second_derivative(&self, _x: &[f64]) -> Tensor4 {
        let d = self.dim();
        Tensor4::zeros(d, d, d, d)
    }
    fn log_pinf(&self, x: &[f64]) -> f64 {
        -2.0 * self.potential.value(x)
    }
    fn grad_log_pinf(&self, x: &[f64]) -> Vector {
        self.potential.gradient(x).scale(-2.0)
    }
    fn hess_log_pinf(&self, x: &[f64]) -> Matrix {
        self.potential.hessian(x).scale(-2.0)
    }
    fn recommended_box(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }
    fn diffusion_matrix(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(self.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_symmetric_eigenvalue;

    fn fd_check(p: &dyn Potential, x: &[f64]) {
        let h = 1e-5;
        let g = p.gradient(x);
        let hs = p.hessian(x);
        for k in 0..p.dim() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * g[k].abs().max(1.0), "grad {k} at {x:?}");
            let gp = p.gradient(&xp);
            let gm = p.gradient(&xm);
            for l in 0..p.dim() {
                let fd = (gp[l] - gm[l]) / (2.0 * h);
                assert!((fd - hs[(l, k)]).abs() < 1e-5 * hs[(l, k)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn potentials_match_finite_differences() {
        fd_check(&Example1Potential { alpha: 0.5 }, &[0.7, -0.3]);
        fd_check(&Example1Potential { alpha: 0.3 }, &[-1.2, 0.9]);
        fd_check(&Example2Potential { eps: 0.1 }, &[0.07, 0.032]);
        fd_check(&Example2Potential { eps: 0.1 }, &[0.4, -0.3]);
        fd_check(&QuadraticPotential { d: 2, c: 1.5 }, &[0.4, -0.3]);
    }

    #[test]
    fn ramp_profile_is_c2_and_convex() {
        let h = 1e-6;
        for k in 0..2000 {
            let s = -1.0 + k as f64 / 1000.0 + 1e-4;
            let (v, v1, v2) = ramp_profile(s);
            assert!(v2 >= -1e-12 && v >= 0.0);
            let (vp, v1p, _) = ramp_profile(s + h);
            let (vm, v1m, _) = ramp_profile(s - h);
            assert!(((vp - vm) / (2.0 * h) - v1).abs() < 1e-6);
            assert!(((v1p - v1m) / (2.0 * h) - v2).abs() < 1e-4);
        }
    }

    #[test]
    fn gamma_minus_at_origin_and_on_the_diagonal() {
        let e = hessian_min_eigen(0.5, &[0.0, 0.0]);
        assert_eq!(e.gamma_minus, 0.0);
        for t in [0.1, 0.5, 1.3, 4.0] {
            let e = hessian_min_eigen(0.5, &[t, t]);
            assert!((e.gamma_minus - e.kappa2.min(2.0)).abs() < 1e-12);
            let direct = min_symmetric_eigenvalue(&Example1Potential { alpha: 0.5 }.hessian(&[t, t]));
            assert!((direct - e.gamma_minus).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_bound_value() {
        let b = example1_tail_bound(0.5, 3.0);
        assert!((b - 0.866_581_110_084_776).abs() < 1e-12);
    }
}
