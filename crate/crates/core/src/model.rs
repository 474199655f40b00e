//! SDE coefficients `dX = σ(X) dW + b(X) dt` with a stationary density.

use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{Matrix, Tensor3, Tensor4, Vector};

/// Coefficients with the analytic derivatives needed by the Θ assembly.
///
/// Index conventions: `drift_jacobian()[(l, k)] = ∂_k b_l`,
/// `sigma_derivative()[(m, l, i)] = ∂_m σ_li`,
/// `sigma_second_derivative()[(m, k, l, i)] = ∂_m ∂_k σ_li`.
/// `log_pinf` may be unnormalized.
pub trait DiffusionModel: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize {
        self.dim()
    }

    fn drift(&self, x: &[f64]) -> Vector;
    fn drift_jacobian(&self, x: &[f64]) -> Matrix;
    fn sigma(&self, x: &[f64]) -> Matrix;
    fn sigma_derivative(&self, x: &[f64]) -> Tensor3;
    fn sigma_second_derivative(&self, x: &[f64]) -> Tensor4;

    fn log_pinf(&self, x: &[f64]) -> f64;
    fn grad_log_pinf(&self, x: &[f64]) -> Vector;
    fn hess_log_pinf(&self, x: &[f64]) -> Matrix;

    /// Box `(lo, hi)` on which the stationary density is numerically supported.
    fn recommended_box(&self) -> (Vec<f64>, Vec<f64>);

    /// `∫ exp(log_pinf)` when known in closed form.
    fn pinf_norm_const(&self) -> Option<f64> {
        None
    }

    /// Exact draw from `p_∞`, when the model has a sampler.
    fn sample_stationary(&self, _rng: &mut dyn RngCore) -> Option<Vector> {
        None
    }

    fn diffusion_matrix(&self, x: &[f64]) -> Matrix {
        self.sigma(x).gram()
    }

    /// Normalized stationary density (unnormalized if no constant is known).
    fn pinf(&self, x: &[f64]) -> f64 {
        let z = self.pinf_norm_const().unwrap_or(1.0);
        self.log_pinf(x).exp() / z
    }
}

impl<M: DiffusionModel + ?Sized> DiffusionModel for Arc<M> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn drift(&self, x: &[f64]) -> Vector {
        (**self).drift(x)
    }
    fn drift_jacobian(&self, x: &[f64]) -> Matrix {
        (**self).drift_jacobian(x)
    }
    fn sigma(&self, x: &[f64]) -> Matrix {
        (**self).sigma(x)
    }
    fn sigma_derivative(&self, x: &[f64]) -> Tensor3 {
        (**self).sigma_derivative(x)
    }
    fn sigma_second_derivative(&self, x: &[f64]) -> Tensor4 {
        (**self).sigma_second_derivative(x)
    }
    fn log_pinf(&self, x: &[f64]) -> f64 {
        (**self).log_pinf(x)
    }
    fn grad_log_pinf(&self, x: &[f64]) -> Vector {
        (**self).grad_log_pinf(x)
    }
    fn hess_log_pinf(&self, x: &[f64]) -> Matrix {
        (**self).hess_log_pinf(x)
    }
    fn recommended_box(&self) -> (Vec<f64>, Vec<f64>) {
        (**self).recommended_box()
    }
    fn pinf_norm_const(&self) -> Option<f64> {
        (**self).pinf_norm_const()
    }
    fn sample_stationary(&self, rng: &mut dyn RngCore) -> Option<Vector> {
        (**self).sample_stationary(rng)
    }
    fn diffusion_matrix(&self, x: &[f64]) -> Matrix {
        (**self).diffusion_matrix(x)
    }
}

/// `a = σσ*` with its first and second derivatives at a point.
///
/// `da[(k, i, j)] = ∂_k a_ij`, `d2a[(k, j, l, m)] = ∂_k ∂_j a_lm`.
#[derive(Clone, Copy, Debug)]
pub struct DerivativeBundle {
    pub x: Vector,
    pub a: Matrix,
    pub da: Tensor3,
    pub d2a: Tensor4,
}

pub fn diffusion_derivatives(model: &dyn DiffusionModel, x: &[f64]) -> DerivativeBundle {
    let s = model.sigma(x);
    let ds = model.sigma_derivative(x);
    let d2s = model.sigma_second_derivative(x);
    derivatives_from_sigma(x, &s, &ds, &d2s)
}

pub(crate) fn derivatives_from_sigma(
    x: &[f64],
    s: &Matrix,
    ds: &Tensor3,
    d2s: &Tensor4,
) -> DerivativeBundle {
    let d = s.rows();
    let q = s.cols();
    let a = s.gram();
    let mut da = Tensor3::zeros(d, d, d);
    let mut d2a = Tensor4::zeros(d, d, d, d);
    for k in 0..d {
        for l in 0..d {
            for m in 0..d {
                let mut v = 0.0;
                for i in 0..q {
                    v += ds[(k, l, i)] * s[(m, i)] + s[(l, i)] * ds[(k, m, i)];
                }
                da[(k, l, m)] = v;
            }
        }
    }
    for k in 0..d {
        for j in 0..d {
            for l in 0..d {
                for m in 0..d {
                    let mut v = 0.0;
                    for i in 0..q {
                        v += d2s[(k, j, l, i)] * s[(m, i)]
                            + ds[(k, l, i)] * ds[(j, m, i)]
                            + ds[(j, l, i)] * ds[(k, m, i)]
                            + s[(l, i)] * d2s[(k, j, m, i)];
                    }
                    d2a[(k, j, l, m)] = v;
                }
            }
        }
    }
    DerivativeBundle { x: Vector::from_slice(x), a, da, d2a }
}

/// `b̄_i = −b_i + ∂_j a_ij + a_ij ∂_j log p_∞`.
pub fn reversed_drift(model: &dyn DiffusionModel, x: &[f64]) -> Vector {
    let d = model.dim();
    let q = model.noise_dim();
    let b = model.drift(x);
    let g = model.grad_log_pinf(x);
    let s = model.sigma(x);
    let ds = model.sigma_derivative(x);
    let a = s.gram();
    Vector::from_fn(d, |i| {
        let mut v = -b[i];
        for j in 0..d {
            v += a[(i, j)] * g[j];
            for k in 0..q {
                v += ds[(j, i, k)] * s[(j, k)] + s[(i, k)] * ds[(j, j, k)];
            }
        }
        v
    })
}

/// `∂_m b̄_l`, indexed `(l, m)` like [`DiffusionModel::drift_jacobian`].
pub fn reversed_drift_jacobian(model: &dyn DiffusionModel, x: &[f64]) -> Matrix {
    let bundle = diffusion_derivatives(model, x);
    reversed_drift_jacobian_with(model, x, &bundle)
}

pub(crate) fn reversed_drift_jacobian_with(
    model: &dyn DiffusionModel,
    x: &[f64],
    bundle: &DerivativeBundle,
) -> Matrix {
    let d = model.dim();
    let jb = model.drift_jacobian(x);
    let g = model.grad_log_pinf(x);
    let h = model.hess_log_pinf(x);
    Matrix::from_fn(d, d, |l, m| {
        let mut v = -jb[(l, m)];
        for j in 0..d {
            v += bundle.d2a[(m, j, l, j)]
                + bundle.da[(m, l, j)] * g[j]
                + bundle.a[(l, j)] * h[(m, j)];
        }
        v
    })
}

/// The stationary time reversal: same `σ` and `p_∞`, drift `b̄`.
pub struct ReversedModel<M> {
    inner: M,
}

impl<M: DiffusionModel> ReversedModel<M> {
    pub fn new(inner: M) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: DiffusionModel> DiffusionModel for ReversedModel<M> {
    fn name(&self) -> String {
        format!("reversed({})", self.inner.name())
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }
    fn drift(&self, x: &[f64]) -> Vector {
        reversed_drift(&self.inner, x)
    }
    fn drift_jacobian(&self, x: &[f64]) -> Matrix {
        reversed_drift_jacobian(&self.inner, x)
    }
    fn sigma(&self, x: &[f64]) -> Matrix {
        self.inner.sigma(x)
    }
    fn sigma_derivative(&self, x: &[f64]) -> Tensor3 {
        self.inner.sigma_derivative(x)
    }
    fn sigma_second_derivative(&self, x: &[f64]) -> Tensor4 {
        self.inner.sigma_second_derivative(x)
    }
    fn log_pinf(&self, x: &[f64]) -> f64 {
        self.inner.log_pinf(x)
    }
    fn grad_log_pinf(&self, x: &[f64]) -> Vector {
        self.inner.grad_log_pinf(x)
    }
    fn hess_log_pinf(&self, x: &[f64]) -> Matrix {
        self.inner.hess_log_pinf(x)
    }
    fn recommended_box(&self) -> (Vec<f64>, Vec<f64>) {
        self.inner.recommended_box()
    }
    fn pinf_norm_const(&self) -> Option<f64> {
        self.inner.pinf_norm_const()
    }
    fn sample_stationary(&self, rng: &mut dyn RngCore) -> Option<Vector> {
        self.inner.sample_stationary(rng)
    }
}

/// `(½ ∂_ij(a_ij p_∞) − ∂_i(b_i p_∞))(x)` from the analytic derivatives.
pub fn stationarity_residual_at(model: &dyn DiffusionModel, x: &[f64]) -> f64 {
    let d = model.dim();
    let bundle = diffusion_derivatives(model, x);
    let b = model.drift(x);
    let jb = model.drift_jacobian(x);
    let g = model.grad_log_pinf(x);
    let h = model.hess_log_pinf(x);
    let mut second = 0.0;
    let mut first = 0.0;
    for i in 0..d {
        first += jb[(i, i)] + b[i] * g[i];
        for j in 0..d {
            second += bundle.d2a[(i, j, i, j)]
                + 2.0 * bundle.da[(i, i, j)] * g[j]
                + bundle.a[(i, j)] * (h[(i, j)] + g[i] * g[j]);
        }
    }
    (0.5 * second - first) * model.pinf(x)
}

/// Residual field on the grid nodes; the sup-norm is the maximum of `abs`.
pub fn stationarity_residual(model: &dyn DiffusionModel, grid: &GridSpec) -> Vec<f64> {
    grid.nodes().map(|x| stationarity_residual_at(model, &x)).collect()
}

/// The same residual by fourth-order central differences of `a p_∞` and `b p_∞`.
pub fn stationarity_residual_fd(model: &dyn DiffusionModel, x: &[f64], h: f64) -> f64 {
    let d = model.dim();
    let shifted = |offsets: &[(usize, f64)]| {
        let mut y = Vector::from_slice(x);
        for &(k, s) in offsets {
            y[k] += s;
        }
        y
    };
    let ap = |y: &[f64], i: usize, j: usize| model.diffusion_matrix(y)[(i, j)] * model.pinf(y);
    let bp = |y: &[f64], i: usize| model.drift(y)[i] * model.pinf(y);
    let c = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
    let mut first = 0.0;
    let mut second = 0.0;
    for i in 0..d {
        for &(s, w) in &c {
            first += w * bp(&shifted(&[(i, s * h)]), i) / h;
        }
        for j in 0..d {
            if i == j {
                let c2 = [
                    (-2.0, -1.0 / 12.0),
                    (-1.0, 16.0 / 12.0),
                    (0.0, -30.0 / 12.0),
                    (1.0, 16.0 / 12.0),
                    (2.0, -1.0 / 12.0),
                ];
                for &(s, w) in &c2 {
                    second += w * ap(&shifted(&[(i, s * h)]), i, i) / (h * h);
                }
            } else {
                for &(s, ws) in &c {
                    for &(t, wt) in &c {
                        second += ws * wt * ap(&shifted(&[(i, s * h), (j, t * h)]), i, j) / (h * h);
                    }
                }
            }
        }
    }
    0.5 * second - first
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldAudit {
    pub field: &'static str,
    /// `max |analytic − fd| / max(|analytic|, 1)` over points and entries.
    pub max_rel_deviation: f64,
    /// Forward and backward differences of the field disagree at some point,
    /// i.e. the field has a kink there.
    pub one_sided: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub fields: Vec<FieldAudit>,
}

impl AuditReport {
    pub fn field(&self, name: &str) -> Option<&FieldAudit> {
        self.fields.iter().find(|f| f.field == name)
    }

    pub fn max_deviation(&self) -> f64 {
        self.fields.iter().map(|f| f.max_rel_deviation).fold(0.0, f64::max)
    }
}

/// A smooth field gives `|fwd − bwd| ≈ h |f''|`; a `|s|^γ` kink with γ < 1
/// gives order `h^{γ−1}`. The threshold `KINK_TOLERANCE / √h` separates them.
const KINK_TOLERANCE: f64 = 1e-2;

/// Compares each analytic derivative field with central differences of the
/// field one order below.
pub fn finite_difference_audit(model: &dyn DiffusionModel, points: &[Vector], h: f64) -> Result<AuditReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("audit step must be positive, got {h}")));
    }
    let d = model.dim();
    let q = model.noise_dim();

    // (name, analytic entries, entries of the primitive field)
    type Flat<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>;
    let fields: Vec<(&'static str, Flat, Flat)> = vec![
        (
            "drift_jacobian",
            Box::new(|x| {
                let j = model.drift_jacobian(x);
                (0..d).flat_map(|k| (0..d).map(move |l| (l, k))).map(|(l, k)| j[(l, k)]).collect()
            }),
            Box::new(|x| model.drift(x).to_vec()),
        ),
        (
            "sigma_derivative",
            Box::new(|x| {
                let t = model.sigma_derivative(x);
                let mut v = Vec::new();
                for m in 0..d {
                    for l in 0..d {
                        for i in 0..q {
                            v.push(t[(m, l, i)]);
                        }
                    }
                }
                v
            }),
            Box::new(|x| {
                let s = model.sigma(x);
                (0..d).flat_map(|l| (0..q).map(move |i| (l, i))).map(|(l, i)| s[(l, i)]).collect()
            }),
        ),
        (
            "sigma_second_derivative",
            Box::new(|x| {
                let t = model.sigma_second_derivative(x);
                let mut v = Vec::new();
                for m in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            for i in 0..q {
                                v.push(t[(m, k, l, i)]);
                            }
                        }
                    }
                }
                v
            }),
            Box::new(|x| {
                let t = model.sigma_derivative(x);
                let mut v = Vec::new();
                for k in 0..d {
                    for l in 0..d {
                        for i in 0..q {
                            v.push(t[(k, l, i)]);
                        }
                    }
                }
                v
            }),
        ),
        (
            "grad_log_pinf",
            Box::new(|x| model.grad_log_pinf(x).to_vec()),
            Box::new(|x| vec![model.log_pinf(x)]),
        ),
        (
            "hess_log_pinf",
            Box::new(|x| {
                let hm = model.hess_log_pinf(x);
                (0..d).flat_map(|m| (0..d).map(move |j| (m, j))).map(|(m, j)| hm[(m, j)]).collect()
            }),
            Box::new(|x| model.grad_log_pinf(x).to_vec()),
        ),
    ];

    let mut out = Vec::new();
    for (name, analytic, primitive) in &fields {
        let mut worst: f64 = 0.0;
        let mut one_sided = false;
        for x in points {
            let an = analytic(x);
            let width = primitive(x).len();
            // FD of the primitive along axis m fills the block for derivative index m.
            for m in 0..d {
                let mut xp = *x;
                let mut xm = *x;
                xp[m] += h;
                xm[m] -= h;
                let fp = primitive(&xp);
                let fm = primitive(&xm);
                for e in 0..width {
                    let fd = (fp[e] - fm[e]) / (2.0 * h);
                    let a = an[m * width + e];
                    worst = worst.max((a - fd).abs() / a.abs().max(1.0));
                }
                // Kink test on the analytic field itself.
                let (ap, am) = (analytic(&xp), analytic(&xm));
                for e in 0..an.len() {
                    let fwd = (ap[e] - an[e]) / h;
                    let bwd = (an[e] - am[e]) / h;
                    if (fwd - bwd).abs() > KINK_TOLERANCE / h.sqrt() {
                        one_sided = true;
                    }
                }
            }
        }
        out.push(FieldAudit { field: name, max_rel_deviation: worst, one_sided });
    }
    Ok(AuditReport { fields: out })
}
