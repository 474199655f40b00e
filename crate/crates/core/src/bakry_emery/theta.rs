//! Pointwise assembly of Θ.
//!
//! Index conventions follow [`crate::model`]: `a = σσ*`, `da[(k, i, j)] = ∂_k a_ij`,
//! `d2a[(k, j, l, m)] = ∂_kj a_lm`, `ds[(m, l, i)] = ∂_m σ_li`,
//! `d2s[(m, k, l, i)] = ∂_mk σ_li`, `jb[(l, k)] = ∂_k b_l`.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Tensor3, Tensor4, Vector};
use crate::model::{derivatives_from_sigma, reversed_drift_jacobian_with, DiffusionModel};

/// Relative asymmetry above which the unsymmetrized Θ signals a bug.
pub const ASYMMETRY_TOLERANCE: f64 = 1e-10;

pub(crate) struct PointData {
    pub d: usize,
    pub q: usize,
    pub b: Vector,
    pub jb: Matrix,
    pub s: Matrix,
    pub ds: Tensor3,
    pub d2s: Tensor4,
    pub a: Matrix,
    pub da: Tensor3,
    pub d2a: Tensor4,
    pub g: Vector,
    pub h: Matrix,
}

impl PointData {
    pub fn new(model: &dyn DiffusionModel, x: &[f64]) -> Self {
        let s = model.sigma(x);
        let ds = model.sigma_derivative(x);
        let d2s = model.sigma_second_derivative(x);
        let bundle = derivatives_from_sigma(x, &s, &ds, &d2s);
        Self {
            d: model.dim(),
            q: s.cols(),
            b: model.drift(x),
            jb: model.drift_jacobian(x),
            s,
            ds,
            d2s,
            a: bundle.a,
            da: bundle.da,
            d2a: bundle.d2a,
            g: model.grad_log_pinf(x),
            h: model.hess_log_pinf(x),
        }
    }
}

fn finish(raw: Matrix, x: &[f64]) -> Result<Matrix> {
    if !raw.max_abs().is_finite() {
        return Err(Error::NonFinite(format!("Θ at {x:?}")));
    }
    let asym = raw.asymmetry();
    if asym > ASYMMETRY_TOLERANCE * raw.max_abs().max(1.0) {
        return Err(Error::Asymmetric { asymmetry: asym, at: x.to_vec() });
    }
    Ok(raw.symmetric_part())
}

pub(crate) fn theta_raw(p: &PointData) -> Matrix {
    let (d, q) = (p.d, p.q);
    let (a, da, d2a, s, ds, d2s) = (&p.a, &p.da, &p.d2a, &p.s, &p.ds, &p.d2s);
    let mut th = Matrix::zeros(d, d);
    for l in 0..d {
        for lp in 0..d {
            let mut v = 0.0;
            for m in 0..d {
                v -= 0.5 * p.b[m] * da[(m, l, lp)];
            }
            for k in 0..d {
                v += 0.5 * (a[(k, lp)] * p.jb[(l, k)] + a[(k, l)] * p.jb[(lp, k)]);
            }
            for m in 0..d {
                for k in 0..d {
                    v -= 0.25 * a[(m, k)] * d2a[(m, k, l, lp)];
                }
            }
            for k in 0..d {
                for j in 0..d {
                    v -= 0.5 * (a[(k, lp)] * d2a[(k, j, l, j)] + a[(k, l)] * d2a[(k, j, lp, j)]);
                    v -= a[(k, l)] * a[(j, lp)] * p.h[(k, j)];
                    v -= 0.5 * (a[(k, l)] * da[(k, lp, j)] + a[(k, lp)] * da[(k, l, j)]) * p.g[j];
                }
            }
            for i in 0..q {
                for m in 0..d {
                    for k in 0..d {
                        v -= 0.25 * a[(m, k)] * ds[(m, l, i)] * ds[(k, lp, i)];
                    }
                }
                for j in 0..q {
                    let mut left = 0.0;
                    let mut right = 0.0;
                    for k in 0..d {
                        left += s[(k, i)] * ds[(k, l, j)];
                        right += s[(k, j)] * ds[(k, lp, i)];
                    }
                    v -= 0.25 * left * right;
                }
            }
            // ½ σ_ki (∂_mσ_li a_ml' + ∂_mσ_l'i a_ml) ∂_k log p_∞ and
            // ½ ∂_k[σ_ki (∂_mσ_li a_ml' + ∂_mσ_l'i a_ml)], product rule expanded
            for k in 0..d {
                for i in 0..q {
                    for m in 0..d {
                        let inner = ds[(m, l, i)] * a[(m, lp)] + ds[(m, lp, i)] * a[(m, l)];
                        v += 0.5 * s[(k, i)] * inner * p.g[k];
                        v += 0.5 * ds[(k, k, i)] * inner;
                        v += 0.5
                            * s[(k, i)]
                            * (d2s[(k, m, l, i)] * a[(m, lp)]
                                + d2s[(k, m, lp, i)] * a[(m, l)]
                                + ds[(m, l, i)] * da[(k, m, lp)]
                                + ds[(m, lp, i)] * da[(k, m, l)]);
                    }
                }
            }
            th[(l, lp)] = v;
        }
    }
    th
}

/// Θ from the ten-term expression in `b`, `σ`, `a` and `log p_∞`.
pub fn assemble_theta(model: &dyn DiffusionModel, x: &[f64]) -> Result<Matrix> {
    finish(theta_raw(&PointData::new(model, x)), x)
}

/// Θ as the symmetric part of
///
/// `Σ_ll' = ¼(∂_kσ_lj a_km ∂_mσ_l'j − σ_ki ∂_kσ_lj σ_mj ∂_mσ_l'i)
///        + ½(b̄_m ∂_m a_ll' + σ_l'i a_mk ∂_mk σ_li) − a_ml' ∂_m b̄_l
///        − ∂_k X_k − X_k ∂_k log p_∞`,
///
/// with `X_k = ½ a_mk ∂_m a_ll' − σ_ki a_ml' ∂_m σ_li` and `b̄` the reversed drift.
pub fn assemble_theta_sigma_form(model: &dyn DiffusionModel, x: &[f64]) -> Result<Matrix> {
    let p = PointData::new(model, x);
    let (d, q) = (p.d, p.q);
    let (a, da, d2a, s, ds, d2s) = (&p.a, &p.da, &p.d2a, &p.s, &p.ds, &p.d2s);
    let bundle = crate::model::DerivativeBundle { x: Vector::from_slice(x), a: *a, da: *da, d2a: *d2a };
    let bbar = Vector::from_fn(d, |i| {
        let mut v = -p.b[i];
        for j in 0..d {
            v += da[(j, i, j)] + a[(i, j)] * p.g[j];
        }
        v
    });
    let jbar = reversed_drift_jacobian_with(model, x, &bundle);
    let mut sig = Matrix::zeros(d, d);
    for l in 0..d {
        for lp in 0..d {
            let mut v = 0.0;
            for j in 0..q {
                for k in 0..d {
                    for m in 0..d {
                        v += 0.25 * ds[(k, l, j)] * a[(k, m)] * ds[(m, lp, j)];
                    }
                }
            }
            for i in 0..q {
                for j in 0..q {
                    let mut left = 0.0;
                    let mut right = 0.0;
                    for k in 0..d {
                        left += s[(k, i)] * ds[(k, l, j)];
                        right += s[(k, j)] * ds[(k, lp, i)];
                    }
                    v -= 0.25 * left * right;
                }
            }
            for m in 0..d {
                v += 0.5 * bbar[m] * da[(m, l, lp)];
                v -= a[(m, lp)] * jbar[(l, m)];
                for k in 0..d {
                    for i in 0..q {
                        v += 0.5 * s[(lp, i)] * a[(m, k)] * d2s[(m, k, l, i)];
                    }
                }
            }
            for k in 0..d {
                let mut xk = 0.0;
                let mut div = 0.0;
                for m in 0..d {
                    xk += 0.5 * a[(m, k)] * da[(m, l, lp)];
                    div += 0.5 * (da[(k, m, k)] * da[(m, l, lp)] + a[(m, k)] * d2a[(k, m, l, lp)]);
                    for i in 0..q {
                        xk -= s[(k, i)] * a[(m, lp)] * ds[(m, l, i)];
                        div -= ds[(k, k, i)] * a[(m, lp)] * ds[(m, l, i)]
                            + s[(k, i)] * da[(k, m, lp)] * ds[(m, l, i)]
                            + s[(k, i)] * a[(m, lp)] * d2s[(k, m, l, i)];
                    }
                }
                v -= div + xk * p.g[k];
            }
            sig[(l, lp)] = v;
        }
    }
    if !sig.max_abs().is_finite() {
        return Err(Error::NonFinite(format!("Σ at {x:?}")));
    }
    Ok(sig.symmetric_part())
}

/// `Θ^α = αΘ − ½ ∂_kα([σ_l'i a_mk − σ_ki a_ml'] ∂_mσ_li + [σ_li a_mk − σ_ki a_ml] ∂_mσ_l'i)`
/// for a weight `α(x) ∈ [0, 1]` given with its gradient.
pub fn mixed_criterion_theta_alpha(
    model: &dyn DiffusionModel,
    alpha: &dyn Fn(&[f64]) -> (f64, Vector),
    x: &[f64],
) -> Result<Matrix> {
    let (w, gw) = alpha(x);
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::AlphaOutOfRange { value: w, at: x.to_vec() });
    }
    let p = PointData::new(model, x);
    let theta = finish(theta_raw(&p), x)?;
    let (d, q) = (p.d, p.q);
    let (a, s, ds) = (&p.a, &p.s, &p.ds);
    let mut out = theta.scale(w);
    for l in 0..d {
        for lp in 0..d {
            let mut v = 0.0;
            for k in 0..d {
                for m in 0..d {
                    for i in 0..q {
                        v += gw[k]
                            * ((s[(lp, i)] * a[(m, k)] - s[(k, i)] * a[(m, lp)]) * ds[(m, l, i)]
                                + (s[(l, i)] * a[(m, k)] - s[(k, i)] * a[(m, l)]) * ds[(m, lp, i)]);
                    }
                }
            }
            out[(l, lp)] -= 0.5 * v;
        }
    }
    Ok(out.symmetric_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_example1, build_nonreversible_ou, build_ou};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ou_theta_is_one() {
        let ou = build_ou(1, 1.0, 1.0).unwrap();
        for x in [-2.0, 0.0, 0.3, 5.0] {
            assert!((assemble_theta(&ou, &[x]).unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
            assert!((assemble_theta_sigma_form(&ou, &[x]).unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn antisymmetric_drift_drops_out_for_identity_q() {
        let j = Matrix::from_rows(&[&[0.0, 1.5], &[-1.5, 0.0]]);
        let m = build_nonreversible_ou(0.8, Matrix::identity(2), j).unwrap();
        let th = assemble_theta(&m, &[0.3, -0.7]).unwrap();
        assert!((th - Matrix::identity(2).scale(1.6)).max_abs() < 1e-12);
    }

    #[test]
    fn dual_forms_agree_under_a_gauge() {
        let m = build_example1(0.5, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)];
            let t1 = assemble_theta(&m, &x).unwrap();
            let t2 = assemble_theta_sigma_form(&m, &x).unwrap();
            assert!((t1 - t2).max_abs() < 1e-9, "{x:?}: {t1:?} vs {t2:?}");
        }
    }

    #[test]
    fn unit_weight_reproduces_theta() {
        let m = build_example1(0.5, 0.1).unwrap();
        let one = |_: &[f64]| (1.0, Vector::zeros(2));
        let zero = |_: &[f64]| (0.0, Vector::zeros(2));
        let x = [0.05, -0.12];
        let th = assemble_theta(&m, &x).unwrap();
        assert!((mixed_criterion_theta_alpha(&m, &one, &x).unwrap() - th).max_abs() < 1e-12);
        assert_eq!(mixed_criterion_theta_alpha(&m, &zero, &x).unwrap().max_abs(), 0.0);
        let bad = |_: &[f64]| (1.5, Vector::zeros(2));
        assert!(matches!(mixed_criterion_theta_alpha(&m, &bad, &x), Err(Error::AlphaOutOfRange { .. })));
    }
}
