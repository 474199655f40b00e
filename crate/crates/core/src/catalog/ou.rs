use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, lower_triangular_inverse, Matrix, Tensor3, Tensor4, Vector};
use crate::model::DiffusionModel;

/// `dX = −kX dt + s dW` in `d` dimensions; `p_∞ = N(0, s²/(2k) I)`.
#[derive(Clone, Copy, Debug)]
pub struct OrnsteinUhlenbeck {
    d: usize,
    k: f64,
    s: f64,
}

pub fn build_ou(d: usize, k: f64, s: f64) -> Result<OrnsteinUhlenbeck> {
    if !(1..=4).contains(&d) {
        return Err(Error::InvalidParameter(format!("OU dimension must be 1..=4, got {d}")));
    }
    if !(k > 0.0 && s > 0.0) {
        return Err(Error::InvalidParameter(format!("OU needs k, s > 0, got k={k}, s={s}")));
    }
    Ok(OrnsteinUhlenbeck { d, k, s })
}

impl OrnsteinUhlenbeck {
    pub fn stationary_variance(&self) -> f64 {
        self.s * self.s / (2.0 * self.k)
    }

    pub fn stiffness(&self) -> f64 {
        self.k
    }
}

impl DiffusionModel for OrnsteinUhlenbeck {
    fn name(&self) -> String {
        format!("ou{}d(k={}, s={})", self.d, self.k, self.s)
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn drift(&self, x: &[f64]) -> Vector {
        Vector::from_fn(self.d, |i| -self.k * x[i])
    }
    fn drift_jacobian(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(self.d).scale(-self.k)
    }
    fn sigma(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(self.d).scale(self.s)
    }
    fn sigma_derivative(&self, _x: &[f64]) -> Tensor3 {
        Tensor3::zeros(self.d, self.d, self.d)
    }
    fn sigma_second_derivative(&self, _x: &[f64]) -> Tensor4 {
        Tensor4::zeros(self.d, self.d, self.d, self.d)
    }
    fn log_pinf(&self, x: &[f64]) -> f64 {
        -self.k / (self.s * self.s) * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn grad_log_pinf(&self, x: &[f64]) -> Vector {
        let c = -2.0 * self.k / (self.s * self.s);
        Vector::from_fn(self.d, |i| c * x[i])
    }
    fn hess_log_pinf(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(self.d).scale(-2.0 * self.k / (self.s * self.s))
    }
    fn recommended_box(&self) -> (Vec<f64>, Vec<f64>) {
        let half = 8.5 * self.stationary_variance().sqrt();
        (vec![-half; self.d], vec![half; self.d])
    }
    fn pinf_norm_const(&self) -> Option<f64> {
        Some((std::f64::consts::PI * self.s * self.s / self.k).powf(self.d as f64 / 2.0))
    }
    fn sample_stationary(&self, rng: &mut dyn RngCore) -> Option<Vector> {
        let sd = self.stationary_variance().sqrt();
        Some(Vector::from_fn(self.d, |_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        }))
    }
    fn diffusion_matrix(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(self.d).scale(self.s * self.s)
    }
}

/// `a = 2νI`, `b = −(Qx + Jx)`, `p_∞ ∝ exp(−xᵀQx / 2ν)`.
#[derive(Clone, Copy, Debug)]
pub struct NonReversibleOu {
    nu: f64,
    q: Matrix,
    j: Matrix,
    /// `√ν L⁻ᵀ` with `Q = L Lᵀ`; maps standard normals to `p_∞` samples.
    sampler: Matrix,
    norm: f64,
}

/// `|tr J| + ‖Sym(QJ)‖_max`, which vanishes iff `∇·(e^{−V/ν} J x) ≡ 0`.
pub fn divergence_residual(q: &Matrix, j: &Matrix) -> f64 {
    j.trace().abs() + (*q * *j).symmetric_part().max_abs()
}

pub fn build_nonreversible_ou(nu: f64, q: Matrix, j: Matrix) -> Result<NonReversibleOu> {
    let d = q.rows();
    if q.cols() != d || j.rows() != d || j.cols() != d || d == 0 {
        return Err(Error::InvalidParameter("Q and J must be square of equal size".into()));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("ν must be positive, got {nu}")));
    }
    if q.asymmetry() > 1e-12 {
        return Err(Error::InvalidParameter("Q must be symmetric".into()));
    }
    let l = cholesky(&q).ok_or_else(|| Error::InvalidParameter("Q must be positive definite".into()))?;
    let res = divergence_residual(&q, &j);
    if res > 1e-8 {
        return Err(Error::DivergenceCondition(res));
    }
    let sampler = lower_triangular_inverse(&l).transpose().scale(nu.sqrt());
    let det_l: f64 = (0..d).map(|i| l[(i, i)]).product();
    let norm = (2.0 * std::f64::consts::PI * nu).powf(d as f64 / 2.0) / det_l;
    Ok(NonReversibleOu { nu, q, j, sampler, norm })
}

impl NonReversibleOu {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `ν(2Q − J − Jᵀ)`.
    pub fn expected_theta(&self) -> Matrix {
        (self.q.scale(2.0) - self.j - self.j.transpose()).scale(self.nu)
    }

    /// `∇V = Qx` and `F = Jx`.
    pub fn potential_gradient(&self, x: &[f64]) -> Vector {
        self.q.mul_vec(x)
    }

    pub fn skew_field(&self, x: &[f64]) -> Vector {
        self.j.mul_vec(x)
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn j(&self) -> &Matrix {
        &self.j
    }
}

impl DiffusionModel for NonReversibleOu {
    fn name(&self) -> String {
        format!("nonrev-ou(nu={}, Q={:?}, J={:?})", self.nu, self.q, self.j)
    }
    fn dim(&self) -> usize {
        self.q.rows()
    }
    fn drift(&self, x: &[f64]) -> Vector {
        (self.q + self.j).mul_vec(x).scale(-1.0)
    }
    fn drift_jacobian(&self, _x: &[f64]) -> Matrix {
        (self.q + self.j).scale(-1.0)
    }
    fn sigma(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(self.dim()).scale((2.0 * self.nu).sqrt())
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
        -self.q.quad_form(x) / (2.0 * self.nu)
    }
    fn grad_log_pinf(&self, x: &[f64]) -> Vector {
        self.q.mul_vec(x).scale(-1.0 / self.nu)
    }
    fn hess_log_pinf(&self, _x: &[f64]) -> Matrix {
        self.q.scale(-1.0 / self.nu)
    }
    fn recommended_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let half: Vec<f64> = (0..d)
            .map(|i| {
                let var: f64 = (0..d).map(|k| self.sampler[(i, k)].powi(2)).sum();
                8.5 * var.sqrt()
            })
            .collect();
        (half.iter().map(|h| -h).collect(), half)
    }
    fn pinf_norm_const(&self) -> Option<f64> {
        Some(self.norm)
    }
    fn sample_stationary(&self, rng: &mut dyn RngCore) -> Option<Vector> {
        let d = self.dim();
        let z = Vector::from_fn(d, |_| StandardNormal.sample(&mut *rng));
        Some(self.sampler.mul_vec(&z))
    }
    fn diffusion_matrix(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(self.dim()).scale(2.0 * self.nu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_ou(0, 1.0, 1.0).is_err());
        assert!(build_ou(1, -1.0, 1.0).is_err());
        let q = Matrix::diagonal(&[1.0, 4.0]);
        let j = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(matches!(build_nonreversible_ou(0.5, q, j), Err(Error::DivergenceCondition(_))));
    }

    #[test]
    fn skew_field_for_anisotropic_q() {
        let q = Matrix::diagonal(&[1.0, 4.0]);
        let j = Matrix::from_rows(&[&[0.0, -4.0], &[1.0, 0.0]]).scale(0.3);
        assert!(divergence_residual(&q, &j) < 1e-15);
        let m = build_nonreversible_ou(0.7, q, j).unwrap();
        let (lo, hi) = m.recommended_box();
        assert!(hi[0] > hi[1] && lo[0] < 0.0);
    }
}
