//! Rotation gauges `σ_φ = R(φ(x))` of an identity diffusion matrix in 2-D.

use std::sync::Arc;

use rand::RngCore;

use crate::catalog::bumps::Bump;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Tensor3, Tensor4, Vector};
use crate::model::DiffusionModel;

/// Scalar phase field `φ` with gradient and Hessian.
pub trait Phase: Send + Sync {
    fn eval(&self, x: &[f64]) -> (f64, Vector, Matrix);
    fn name(&self) -> String;
    /// `φ` vanishes outside `[−r, r]²` when `Some(r)`.
    fn support_half_width(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantPhase(pub f64);

impl Phase for ConstantPhase {
    fn eval(&self, _x: &[f64]) -> (f64, Vector, Matrix) {
        (self.0, Vector::zeros(2), Matrix::zeros(2, 2))
    }
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }
    fn support_half_width(&self) -> Option<f64> {
        (self.0 == 0.0).then_some(0.0)
    }
}

/// `φ(x) = scale · f(x₁) f(x₂)`.
#[derive(Clone)]
pub struct ProductPhase {
    pub scale: f64,
    pub bump: Arc<dyn Bump>,
}

impl Phase for ProductPhase {
    fn eval(&self, x: &[f64]) -> (f64, Vector, Matrix) {
        let (f1, d1, s1) = self.bump.eval(x[0]);
        let (f2, d2, s2) = self.bump.eval(x[1]);
        let c = self.scale;
        (
            c * f1 * f2,
            Vector::from_slice(&[c * d1 * f2, c * f1 * d2]),
            Matrix::from_rows(&[&[c * s1 * f2, c * d1 * d2], &[c * d1 * d2, c * f1 * s2]]),
        )
    }
    fn name(&self) -> String {
        format!("{} * {}(x1) {}(x2)", self.scale, self.bump.name(), self.bump.name())
    }
    fn support_half_width(&self) -> Option<f64> {
        Some(self.bump.support())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaugeKind {
    Rotation2d,
}

#[derive(Clone)]
pub struct GaugeFamily {
    pub kind: GaugeKind,
    pub phi: Arc<dyn Phase>,
    pub parameter: f64,
}

impl GaugeFamily {
    pub fn rotation(phi: Arc<dyn Phase>, parameter: f64) -> Self {
        Self { kind: GaugeKind::Rotation2d, phi, parameter }
    }
}

/// `R(φ) = [[cos φ, sin φ], [−sin φ, cos φ]]` and its first derivative in φ.
pub fn rotation(phi: f64) -> (Matrix, Matrix) {
    let (s, c) = phi.sin_cos();
    (Matrix::from_rows(&[&[c, s], &[-s, c]]), Matrix::from_rows(&[&[-s, c], &[-c, -s]]))
}

/// A base model with `a ≡ I₂` whose square root is replaced by `R(φ)`.
#[derive(Clone)]
pub struct GaugedModel {
    base: Arc<dyn DiffusionModel>,
    family: GaugeFamily,
}

/// Checks `a ≡ I₂` on a 7×7 lattice of the base model's recommended box.
fn assert_identity_diffusion(base: &dyn DiffusionModel) -> Result<()> {
    if base.dim() != 2 || base.noise_dim() != 2 {
        return Err(Error::NotIdentityDiffusion(base.name()));
    }
    let (lo, hi) = base.recommended_box();
    for i in 0..7 {
        for j in 0..7 {
            let x = [
                lo[0] + (hi[0] - lo[0]) * i as f64 / 6.0,
                lo[1] + (hi[1] - lo[1]) * j as f64 / 6.0,
            ];
            if (base.diffusion_matrix(&x) - Matrix::identity(2)).max_abs() > 1e-12 {
                return Err(Error::NotIdentityDiffusion(base.name()));
            }
        }
    }
    Ok(())
}

pub fn rotation_gauge(base: Arc<dyn DiffusionModel>, family: GaugeFamily) -> Result<GaugedModel> {
    assert_identity_diffusion(base.as_ref())?;
    Ok(GaugedModel { base, family })
}

impl GaugedModel {
    pub fn base(&self) -> &Arc<dyn DiffusionModel> {
        &self.base
    }

    pub fn family(&self) -> &GaugeFamily {
        &self.family
    }

    pub fn phase(&self, x: &[f64]) -> (f64, Vector, Matrix) {
        self.family.phi.eval(x)
    }
}

impl DiffusionModel for GaugedModel {
    fn name(&self) -> String {
        format!("{} with gauge {}", self.base.name(), self.family.phi.name())
    }
    fn dim(&self) -> usize {
        2
    }
    fn drift(&self, x: &[f64]) -> Vector {
        self.base.drift(x)
    }
    fn drift_jacobian(&self, x: &[f64]) -> Matrix {
        self.base.drift_jacobian(x)
    }
    fn sigma(&self, x: &[f64]) -> Matrix {
        rotation(self.family.phi.eval(x).0).0
    }
    fn sigma_derivative(&self, x: &[f64]) -> Tensor3 {
        let (phi, g, _) = self.family.phi.eval(x);
        let (_, r1) = rotation(phi);
        let mut t = Tensor3::zeros(2, 2, 2);
        for m in 0..2 {
            for l in 0..2 {
                for i in 0..2 {
                    t[(m, l, i)] = r1[(l, i)] * g[m];
                }
            }
        }
        t
    }
    fn sigma_second_derivative(&self, x: &[f64]) -> Tensor4 {
        let (phi, g, h) = self.family.phi.eval(x);
        let (r0, r1) = rotation(phi);
        let mut t = Tensor4::zeros(2, 2, 2, 2);
        for m in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    for i in 0..2 {
                        t[(m, k, l, i)] = -r0[(l, i)] * g[m] * g[k] + r1[(l, i)] * h[(m, k)];
                    }
                }
            }
        }
        t
    }
    fn log_pinf(&self, x: &[f64]) -> f64 {
        self.base.log_pinf(x)
    }
    fn grad_log_pinf(&self, x: &[f64]) -> Vector {
        self.base.grad_log_pinf(x)
    }
    fn hess_log_pinf(&self, x: &[f64]) -> Matrix {
        self.base.hess_log_pinf(x)
    }
    fn recommended_box(&self) -> (Vec<f64>, Vec<f64>) {
        self.base.recommended_box()
    }
    fn pinf_norm_const(&self) -> Option<f64> {
        self.base.pinf_norm_const()
    }
    fn sample_stationary(&self, rng: &mut dyn RngCore) -> Option<Vector> {
        self.base.sample_stationary(rng)
    }
    fn diffusion_matrix(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(2)
    }
}

/// The closed form of Θ for `a = I₂`, `b = −∇V`, `p_∞ ∝ e^{−2V}` under the
/// gauge `R(φ)`:
///
/// `Θ = ∇²V − ¼|∇φ|² I − ¼[[φ₂², −φ₁φ₂], [−φ₁φ₂, φ₁²]]
///      + [[φ₁₂, (φ₂₂ − φ₁₁)/2], [·, −φ₁₂]]
///      + [[−2φ₁V₂, φ₁V₁ − φ₂V₂], [·, 2φ₂V₁]]`.
pub fn theta_rotation_closed_form(v_grad: &[f64], v_hess: &Matrix, phi_grad: &[f64], phi_hess: &Matrix) -> Matrix {
    let (p1, p2) = (phi_grad[0], phi_grad[1]);
    let (v1, v2) = (v_grad[0], v_grad[1]);
    let n2 = p1 * p1 + p2 * p2;
    let t11 = v_hess[(0, 0)] - 0.25 * n2 - 0.25 * p2 * p2 + phi_hess[(0, 1)] - 2.0 * p1 * v2;
    let t22 = v_hess[(1, 1)] - 0.25 * n2 - 0.25 * p1 * p1 - phi_hess[(0, 1)] + 2.0 * p2 * v1;
    let t12 = 0.5 * (v_hess[(0, 1)] + v_hess[(1, 0)]) + 0.25 * p1 * p2
        + 0.5 * (phi_hess[(1, 1)] - phi_hess[(0, 0)])
        + p1 * v1
        - p2 * v2;
    Matrix::from_rows(&[&[t11, t12], &[t12, t22]])
}
