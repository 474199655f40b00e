use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{cholesky, lower_triangular_inverse, min_symmetric_eigenvalue, Matrix, Vector};
use crate::model::DiffusionModel;

use super::theta::assemble_theta;

/// Smallest eigenvalue of `a` accepted as positive definite.
pub const MIN_DIFFUSION_EIGENVALUE: f64 = 1e-10;

/// Θ at every grid node and the smallest eigenvalue of the pencil `(Θ, a)`.
#[derive(Clone, Debug)]
pub struct ThetaField {
    pub grid: GridSpec,
    pub theta: Vec<Matrix>,
    pub lambda_min: Vec<f64>,
    pub inf_lambda: f64,
    pub argmin: usize,
}

/// Largest `λ` with `Θ ⪰ λa`, via `a = LL*` and `λ_min(L⁻¹ΘL⁻*)`.
pub fn pencil_min_eigenvalue(theta: &Matrix, a: &Matrix, x: &[f64]) -> Result<f64> {
    let singular = || Error::SingularDiffusion(x.to_vec());
    if min_symmetric_eigenvalue(a) <= MIN_DIFFUSION_EIGENVALUE {
        return Err(singular());
    }
    let l = cholesky(a).ok_or_else(singular)?;
    let li = lower_triangular_inverse(&l);
    Ok(min_symmetric_eigenvalue(&(li * *theta * li.transpose()).symmetric_part()))
}

fn node_lambda(model: &dyn DiffusionModel, x: &[f64]) -> Result<(Matrix, f64)> {
    let th = assemble_theta(model, x)?;
    let lam = pencil_min_eigenvalue(&th, &model.diffusion_matrix(x), x)?;
    Ok((th, lam))
}

/// Smallest value and its index; ties resolve to the lower index.
fn argmin(values: &[f64]) -> (usize, f64) {
    values.iter().enumerate().fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best })
}

pub fn nibec_lambda(model: &dyn DiffusionModel, grid: &GridSpec) -> Result<ThetaField> {
    if model.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!("model dimension {} on a {}-d grid", model.dim(), grid.dim())));
    }
    let per_node: Vec<(Matrix, f64)> =
        (0..grid.len()).into_par_iter().map(|i| node_lambda(model, &grid.node(i))).collect::<Result<_>>()?;
    let (theta, lambda_min): (Vec<_>, Vec<_>) = per_node.into_iter().unzip();
    let (argmin, inf_lambda) = argmin(&lambda_min);
    Ok(ThetaField { grid: grid.clone(), theta, lambda_min, inf_lambda, argmin })
}

/// Grid infimum of the pencil eigenvalue and the node attaining it, without
/// storing the field.
pub fn inf_lambda_on_grid(model: &dyn DiffusionModel, grid: &GridSpec) -> Result<(f64, Vector)> {
    if model.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!("model dimension {} on a {}-d grid", model.dim(), grid.dim())));
    }
    let best = (0..grid.len())
        .into_par_iter()
        .map(|i| node_lambda(model, &grid.node(i)).map(|(_, l)| (i, l)))
        .try_reduce(
            || (usize::MAX, f64::INFINITY),
            |a, b| Ok(if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a }),
        )?;
    Ok((best.1, grid.node(best.0)))
}

impl ThetaField {
    pub fn argmin_point(&self) -> Vector {
        self.grid.node(self.argmin)
    }

    /// Worst value of `λ_min v*av − v*Θv` over `probes` random unit vectors per
    /// node; a valid field keeps it below `1e−9`.
    pub fn certificate_violation(&self, model: &dyn DiffusionModel, probes: usize, seed: u64) -> f64 {
        let d = self.grid.dim();
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let a = model.diffusion_matrix(&self.grid.node(i));
                let mut worst = f64::NEG_INFINITY;
                for _ in 0..probes {
                    let v = Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
                    let n = v.norm();
                    if n < 1e-8 {
                        continue;
                    }
                    let v = v.scale(1.0 / n);
                    worst = worst.max(self.lambda_min[i] * a.quad_form(&v) - self.theta[i].quad_form(&v));
                }
                worst
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }

    /// Columns `x1, x2, theta11, theta12, theta22, lambda_min` (1-D grids:
    /// `x1, theta11, lambda_min`).
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        if self.grid.dim() == 1 {
            writeln!(w, "x1,theta11,lambda_min")?;
            for (i, (t, l)) in self.theta.iter().zip(&self.lambda_min).enumerate() {
                writeln!(w, "{},{},{}", self.grid.node(i)[0], t[(0, 0)], l)?;
            }
        } else {
            writeln!(w, "x1,x2,theta11,theta12,theta22,lambda_min")?;
            for (i, (t, l)) in self.theta.iter().zip(&self.lambda_min).enumerate() {
                let x = self.grid.node(i);
                writeln!(w, "{},{},{},{},{},{}", x[0], x[1], t[(0, 0)], t[(0, 1)], t[(1, 1)], l)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_ou;

    #[test]
    fn pencil_reduces_to_plain_eigenvalue_for_identity() {
        let th = Matrix::diagonal(&[2.0, 0.05]);
        let l = pencil_min_eigenvalue(&th, &Matrix::identity(2), &[0.0, 0.0]).unwrap();
        assert!((l - 0.05).abs() < 1e-15);
        let a = Matrix::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]);
        assert!((pencil_min_eigenvalue(&a, &a, &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-13);
        assert!(pencil_min_eigenvalue(&th, &Matrix::diagonal(&[1.0, 0.0]), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn ou_field_is_flat() {
        let ou = build_ou(1, 1.0, 1.0).unwrap();
        let g = GridSpec::cube(1, -4.0, 4.0, 65).unwrap();
        let f = nibec_lambda(&ou, &g).unwrap();
        assert!((f.inf_lambda - 1.0).abs() < 1e-9);
        assert!(f.certificate_violation(&ou, 20, 1) < 1e-9);
        let (inf, _) = inf_lambda_on_grid(&ou, &g).unwrap();
        assert_eq!(inf, f.inf_lambda);
    }
}
