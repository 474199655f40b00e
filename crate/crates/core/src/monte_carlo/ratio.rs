//! The density-ratio process `D_k = ρ_{T−t_k}(Y_k)`, `ρ_s = p_s/p_∞`, along
//! reversed paths, directly and through its exponential-martingale form.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fokker_planck::DensityTrajectory;
use crate::grid::{GridDensity, GridSpec};
use crate::linalg::Vector;
use crate::model::{reversed_drift, DiffusionModel};

use super::paths::{Direction, PathEnsemble};

/// Values below this are treated as the absorbing state 0.
pub const D_FLOOR: f64 = 1e-12;

/// Share of clamped path-steps above which a run is invalid.
pub const MAX_CLAMPED_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioSource {
    DensityRatio,
    ExponentialForm,
}

/// `values[p·n_times + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioSeries {
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub values: Vec<f64>,
    pub hit_zero_index: Vec<Option<usize>>,
    /// Per record, the share of paths outside the grid box.
    pub clamped_fraction: Vec<f64>,
    pub source: RatioSource,
}

impl RatioSeries {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn at(&self, path: usize, k: usize) -> f64 {
        self.values[path * self.times.len() + k]
    }

    pub fn path(&self, path: usize) -> &[f64] {
        let n = self.times.len();
        &self.values[path * n..(path + 1) * n]
    }

    pub fn overall_clamped_fraction(&self) -> f64 {
        self.clamped_fraction.iter().sum::<f64>() / self.clamped_fraction.len() as f64
    }
}

fn ratio_field(p: &GridDensity, pinf: &GridDensity) -> Result<Vec<f64>> {
    if !p.grid().same_as(pinf.grid()) {
        return Err(Error::GridMismatch("trajectory and p_∞ grids differ".into()));
    }
    Ok(p.values().iter().zip(pinf.values()).map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 }).collect())
}

/// The snapshots `p_{T−t_k}` for every record time `t_k` of the ensemble.
fn matching_snapshots<'a>(ens: &PathEnsemble, ptraj: &'a DensityTrajectory) -> Result<Vec<&'a GridDensity>> {
    if ens.direction != Direction::Reversed {
        return Err(Error::InvalidParameter("density ratios are defined along reversed paths".into()));
    }
    let t_end = ens.t_end();
    ens.times
        .iter()
        .map(|&t| {
            ptraj.at_time(t_end - t).ok_or_else(|| {
                Error::TimeMismatch(format!("no density snapshot at t = {} (snapshot step {})", t_end - t, ptraj.snapshot_dt))
            })
        })
        .collect()
}

fn absorb(path: &mut [f64]) -> Option<usize> {
    let hit = path.iter().position(|&v| v < D_FLOOR)?;
    for v in &mut path[hit..] {
        *v = 0.0;
    }
    Some(hit)
}

fn assemble(
    ens: &PathEnsemble,
    per_path: Vec<(Vec<f64>, Vec<bool>)>,
    source: RatioSource,
) -> RatioSeries {
    let n = ens.n_times();
    let mut values = Vec::with_capacity(ens.n_paths * n);
    let mut hit_zero_index = Vec::with_capacity(ens.n_paths);
    let mut clamped = vec![0usize; n];
    for (mut v, c) in per_path {
        hit_zero_index.push(absorb(&mut v));
        for (k, flag) in c.iter().enumerate() {
            clamped[k] += *flag as usize;
        }
        values.extend(v);
    }
    RatioSeries {
        times: ens.times.clone(),
        n_paths: ens.n_paths,
        values,
        hit_zero_index,
        clamped_fraction: clamped.iter().map(|&c| c as f64 / ens.n_paths as f64).collect(),
        source,
    }
}

/// `D_k = ρ_{T−t_k}(Y_k)` by multilinear interpolation of the nodal ratio.
pub fn density_ratio_process(ens: &PathEnsemble, ptraj: &DensityTrajectory, pinf: &GridDensity) -> Result<RatioSeries> {
    let snaps = matching_snapshots(ens, ptraj)?;
    let fields: Vec<Vec<f64>> = snaps.iter().map(|p| ratio_field(p, pinf)).collect::<Result<_>>()?;
    let grid = pinf.grid();
    let per_path = (0..ens.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut v = Vec::with_capacity(ens.n_times());
            let mut c = Vec::with_capacity(ens.n_times());
            for (k, f) in fields.iter().enumerate() {
                let (r, clamped) = grid.interpolate(f, ens.state(p, k));
                v.push(r.max(0.0));
                c.push(clamped);
            }
            (v, c)
        })
        .collect();
    Ok(assemble(ens, per_path, RatioSource::DensityRatio))
}

/// Nodal `∇ log ρ` on a grid, one vector field per component.
fn log_ratio_gradient(grid: &GridSpec, rho: &[f64]) -> Vec<Vec<f64>> {
    let d = grid.dim();
    let lr: Vec<f64> = rho.iter().map(|r| r.max(D_FLOOR).ln()).collect();
    let mut out = vec![vec![0.0; grid.len()]; d];
    for i in 0..grid.len() {
        let g = grid.nodal_gradient(&lr, i);
        for k in 0..d {
            out[k][i] = g[k];
        }
    }
    out
}

/// `D̂_k = ρ_T(Y_0) exp(Σ_{j<k} g_j·ΔM_j − ½ g_j* a g_j Δt)` with
/// `g_j = ∇ log ρ_{T−t_j}(Y_j)` and `ΔM_j = Y_{j+1} − Y_j − b̄(Y_j)Δt`.
///
/// Needs every Euler step stored and a density snapshot at every step.
pub fn exponential_girsanov_process(
    ens: &PathEnsemble,
    ptraj: &DensityTrajectory,
    pinf: &GridDensity,
    model: &dyn DiffusionModel,
) -> Result<RatioSeries> {
    if ens.record_every != 1 {
        return Err(Error::InvalidParameter("the exponential form needs record_every = 1".into()));
    }
    let snaps = matching_snapshots(ens, ptraj)?;
    let grid = pinf.grid();
    let rhos: Vec<Vec<f64>> = snaps.iter().map(|p| ratio_field(p, pinf)).collect::<Result<_>>()?;
    if rhos.iter().flatten().any(|&r| r <= 0.0) {
        return Err(Error::InvalidParameter("the exponential form needs p > 0 on the grid".into()));
    }
    let grads: Vec<Vec<Vec<f64>>> = rhos.iter().map(|r| log_ratio_gradient(grid, r)).collect();
    let d = ens.d;
    let dt = ens.dt;
    let per_path = (0..ens.n_paths)
        .into_par_iter()
        .map(|p| {
            let n = ens.n_times();
            let mut v = Vec::with_capacity(n);
            let mut c = Vec::with_capacity(n);
            let y0 = ens.state(p, 0);
            let (r0, c0) = grid.interpolate(&rhos[0], y0);
            let mut log_d = r0.max(D_FLOOR).ln();
            v.push(r0);
            c.push(c0);
            for k in 0..n - 1 {
                let y = ens.state(p, k);
                let y1 = ens.state(p, k + 1);
                let g = Vector::from_fn(d, |i| grid.interpolate(&grads[k][i], y).0);
                let bb = reversed_drift(model, y);
                let a = model.diffusion_matrix(y);
                let dm = Vector::from_fn(d, |i| y1[i] - y[i] - bb[i] * dt);
                log_d += g.dot(&dm) - 0.5 * a.quad_form(&g) * dt;
                v.push(log_d.exp());
                c.push(!grid.contains(y1));
            }
            (v, c)
        })
        .collect();
    Ok(assemble(ens, per_path, RatioSource::ExponentialForm))
}

/// Median over paths of `|D̂_T − D_T| / D_T` at the final record.
pub fn median_relative_deviation(exact: &RatioSeries, approx: &RatioSeries) -> Result<f64> {
    if exact.n_paths != approx.n_paths || exact.n_times() != approx.n_times() {
        return Err(Error::InvalidParameter("ratio series have different shapes".into()));
    }
    let last = exact.n_times() - 1;
    let mut dev: Vec<f64> = (0..exact.n_paths)
        .filter(|&p| exact.at(p, last) > D_FLOOR)
        .map(|p| (approx.at(p, last) - exact.at(p, last)).abs() / exact.at(p, last))
        .collect();
    if dev.is_empty() {
        return Err(Error::DegenerateEnsemble("every path is absorbed".into()));
    }
    dev.sort_by(f64::total_cmp);
    let m = dev.len();
    Ok(if m % 2 == 1 { dev[m / 2] } else { 0.5 * (dev[m / 2 - 1] + dev[m / 2]) })
}
