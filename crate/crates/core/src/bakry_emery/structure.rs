//! The 2×2 matrices Γ and Λ_δ whose trace product controls the sign of the
//! Fisher-information dissipation.

use crate::entropy::EntropyGenerator;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Tensor3, Vector};
use crate::model::DiffusionModel;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaPair {
    pub gamma: Matrix,
    pub lambda_delta: Matrix,
    pub trace_product: f64,
}

impl GammaPair {
    pub fn new(gamma: Matrix, lambda_delta: Matrix) -> Self {
        let trace_product = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| lambda_delta[(i, j)] * gamma[(j, i)]).sum();
        Self { gamma, lambda_delta, trace_product }
    }
}

/// `A_ij = σ_kj σ_li ∂_kl ρ + ½(σ_kj ∂_kσ_li + σ_ki ∂_kσ_lj) ∂_l ρ`.
fn a_matrix(s: &Matrix, ds: &Tensor3, grad: &[f64], hess: &Matrix) -> Matrix {
    let (d, q) = (s.rows(), s.cols());
    Matrix::from_fn(q, q, |i, j| {
        let mut v = 0.0;
        for k in 0..d {
            for l in 0..d {
                v += s[(k, j)] * s[(l, i)] * hess[(k, l)]
                    + 0.5 * (s[(k, j)] * ds[(k, l, i)] + s[(k, i)] * ds[(k, l, j)]) * grad[l];
            }
        }
        v
    })
}

/// Γ from `σ`, `∂σ` and the first two derivatives of `ρ`:
/// `Γ₁₁ = Σ A_ij²`, `Γ₁₂ = Σ u_i u_j A_ij` with `u = σ*∇ρ`, `Γ₂₂ = (∇ρ* a ∇ρ)²`.
pub fn gamma_from_sigma(s: &Matrix, ds: &Tensor3, grad: &[f64], hess: &Matrix) -> Matrix {
    let q = s.cols();
    let am = a_matrix(s, ds, grad, hess);
    let u = s.transpose().mul_vec(grad);
    let mut g11 = 0.0;
    let mut g12 = 0.0;
    for i in 0..q {
        for j in 0..q {
            g11 += am[(i, j)] * am[(i, j)];
            g12 += u[i] * u[j] * am[(i, j)];
        }
    }
    let g22 = u.dot(&u).powi(2);
    Matrix::from_rows(&[&[g11, g12], &[g12, g22]])
}

/// `Γ₁₂ = Σ_i (σ_•i·∇ρ) ∇*ρ a ∇(σ_•i·∇ρ)`, written without the matrix `A`.
pub fn gamma12_direct(s: &Matrix, ds: &Tensor3, grad: &[f64], hess: &Matrix) -> f64 {
    let (d, q) = (s.rows(), s.cols());
    let a_grad = s.gram().mul_vec(grad);
    let mut out = 0.0;
    for i in 0..q {
        let ui: f64 = (0..d).map(|l| s[(l, i)] * grad[l]).sum();
        let grad_ui = Vector::from_fn(d, |k| (0..d).map(|l| ds[(k, l, i)] * grad[l] + s[(l, i)] * hess[(k, l)]).sum());
        out += ui * a_grad.dot(&grad_ui);
    }
    out
}

pub fn gamma_matrix(model: &dyn DiffusionModel, rho_grad: &[f64], rho_hess: &Matrix, x: &[f64]) -> Matrix {
    gamma_from_sigma(&model.sigma(x), &model.sigma_derivative(x), rho_grad, rho_hess)
}

/// `[[U''(r+δ), U⁽³⁾(r+δ)], [U⁽³⁾(r+δ), ½U⁽⁴⁾(r+δ)]]`.
pub fn lambda_delta_matrix(u: &EntropyGenerator, r: f64, delta: f64) -> Result<Matrix> {
    if !(r >= 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("need r ≥ 0 and δ > 0, got r = {r}, δ = {delta}")));
    }
    u.require(4)?;
    let s = r + delta;
    let d = |k| u.derivative(k, s).expect("checked order");
    let (u2, u3, u4) = (d(2), d(3), d(4));
    Ok(Matrix::from_rows(&[&[u2, u3], &[u3, 0.5 * u4]]))
}
