//! Explicit finite-volume solver for `∂_t p = ½∂_ij(a_ij p) − ∂_i(b_i p)` on a
//! box with zero-flux walls.
//!
//! The drift is split as `b = b_rev + b_irr` with `b_rev = ½∂_j a_ij + ½ a ∇log p_∞`.
//! The reversible flux `−½a p_∞ ∇(p/p_∞)` uses Scharfetter–Gummel weights in
//! `ψ = log p_∞`, which makes the projected `p_∞` an exact discrete fixed point
//! when `b_irr = 0`. The remainder is upwinded. Only diagonal `a` is supported.

use std::io::Write;

use rayon::prelude::*;

use crate::entropy::{evaluate_entropy, evaluate_fisher, total_variation, EntropyGenerator, EntropyKind};
use crate::error::{Error, Result};
use crate::grid::{GridDensity, GridSpec, MAX_GRID_DIM};
use crate::model::DiffusionModel;

/// Safety factor in `dt ≤ C·min(h²/max a, h/max|b|)`.
pub const STABILITY_FACTOR: f64 = 0.4;

const PARALLEL_THRESHOLD: usize = 8192;

/// Rejects models whose diffusion matrix has off-diagonal entries on the grid.
pub fn require_diagonal(model: &dyn DiffusionModel, grid: &GridSpec) -> Result<()> {
    if model.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!("model dimension {} on a {}-d grid", model.dim(), grid.dim())));
    }
    let d = grid.dim();
    for x in grid.nodes() {
        let a = model.diffusion_matrix(&x);
        for i in 0..d {
            for j in 0..d {
                if i != j && a[(i, j)].abs() > 1e-12 * (a[(i, i)].abs() + a[(j, j)].abs()) {
                    return Err(Error::Unsupported(format!(
                        "grid solvers need a diagonal diffusion matrix; a{}{} = {} at {:?}",
                        i + 1,
                        j + 1,
                        a[(i, j)],
                        x
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Nodal values of `f`, renormalized to unit mass on the box.
pub fn project_density(f: impl Fn(&[f64]) -> f64, grid: &GridSpec) -> Result<GridDensity> {
    let values: Vec<f64> = grid.nodes().map(|x| f(&x)).collect();
    if values.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter("density vanishes at every node".into()));
    }
    GridDensity::new(grid.clone(), values, 0.0)?.normalized()
}

/// `p_∞` projected on the grid, evaluated as `exp(log p_∞ − max log p_∞)`.
pub fn stationary_density(model: &dyn DiffusionModel, grid: &GridSpec) -> Result<GridDensity> {
    let lp: Vec<f64> = grid.nodes().map(|x| model.log_pinf(&x)).collect();
    let top = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    GridDensity::new(grid.clone(), lp.iter().map(|l| (l - top).exp()).collect(), 0.0)?.normalized()
}

/// Density of `N(mean, var·I)`.
pub fn gaussian(mean: Vec<f64>, var: f64) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| {
        let d = mean.len() as f64;
        let r2: f64 = x.iter().zip(&mean).map(|(a, m)| (a - m).powi(2)).sum();
        (-r2 / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).powf(d / 2.0)
    }
}

/// `z / (e^z − 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z / 2.0
    } else {
        z / z.exp_m1()
    }
}

/// Precomputed face coefficients: the flux through the face between node `i`
/// and its upper neighbour along `axis` is `c_plus·p_upper − c_minus·p_i`.
#[derive(Clone, Debug)]
pub struct FokkerPlanckOperator {
    grid: GridSpec,
    c_plus: [Vec<f64>; MAX_GRID_DIM],
    c_minus: [Vec<f64>; MAX_GRID_DIM],
    stability_limit: f64,
    model_name: String,
}

impl FokkerPlanckOperator {
    pub fn new(model: &dyn DiffusionModel, grid: &GridSpec) -> Result<Self> {
        require_diagonal(model, grid)?;
        let d = grid.dim();
        let n = grid.len();
        let psi: Vec<f64> = grid.nodes().map(|x| model.log_pinf(&x)).collect();
        let mut c_plus = [vec![0.0; n], vec![0.0; n]];
        let mut c_minus = [vec![0.0; n], vec![0.0; n]];
        let mut max_a: f64 = 0.0;
        let mut max_b: f64 = 0.0;
        for x in grid.nodes() {
            let a = model.diffusion_matrix(&x);
            let b = model.drift(&x);
            for k in 0..d {
                max_a = max_a.max(a[(k, k)]);
                max_b = max_b.max(b[k].abs());
            }
        }
        for axis in 0..d {
            let h = grid.spacing(axis);
            for i in 0..n {
                let idx = grid.multi_index(i);
                if idx[axis] + 1 == grid.nodes_per_axis()[axis] {
                    continue;
                }
                let mut jdx = idx;
                jdx[axis] += 1;
                let j = grid.flat_index(&jdx[..d]);
                let mut face = grid.node(i);
                face[axis] += 0.5 * h;
                let bundle = crate::model::diffusion_derivatives(model, &face);
                let g = model.grad_log_pinf(&face);
                let a = bundle.a[(axis, axis)];
                let b_rev = 0.5 * bundle.da[(axis, axis, axis)] + 0.5 * a * g[axis];
                let b_irr = model.drift(&face)[axis] - b_rev;
                let dpsi = psi[j] - psi[i];
                let diff = 0.5 * a / h;
                c_plus[axis][i] = diff * bernoulli(dpsi) - b_irr.min(0.0);
                c_minus[axis][i] = diff * bernoulli(-dpsi) + b_irr.max(0.0);
            }
        }
        let mut limit = f64::INFINITY;
        for axis in 0..d {
            let h = grid.spacing(axis);
            if max_a > 0.0 {
                limit = limit.min(STABILITY_FACTOR * h * h / max_a);
            }
            if max_b > 0.0 {
                limit = limit.min(STABILITY_FACTOR * h / max_b);
            }
        }
        // positivity: dt · (total outflow rate) ≤ 1 at every node
        let mut out_rate: f64 = 0.0;
        for i in 0..n {
            let idx = grid.multi_index(i);
            let mut r = 0.0;
            for axis in 0..d {
                let h = grid.spacing(axis);
                r += c_minus[axis][i] / h;
                if idx[axis] > 0 {
                    let mut jdx = idx;
                    jdx[axis] -= 1;
                    r += c_plus[axis][grid.flat_index(&jdx[..d])] / h;
                }
            }
            out_rate = out_rate.max(r);
        }
        if out_rate > 0.0 {
            limit = limit.min(1.0 / out_rate);
        }
        if !limit.is_finite() || c_plus.iter().chain(&c_minus).flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("Fokker–Planck coefficients for {}", model.name())));
        }
        Ok(Self { grid: grid.clone(), c_plus, c_minus, stability_limit: limit, model_name: model.name() })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Largest admissible explicit time step.
    pub fn stability_limit(&self) -> f64 {
        self.stability_limit
    }

    fn rate_at(&self, p: &[f64], i: usize) -> f64 {
        let g = &self.grid;
        let d = g.dim();
        let idx = g.multi_index(i);
        let mut r = 0.0;
        for axis in 0..d {
            let h = g.spacing(axis);
            if idx[axis] + 1 < g.nodes_per_axis()[axis] {
                let mut jdx = idx;
                jdx[axis] += 1;
                let j = g.flat_index(&jdx[..d]);
                r += (self.c_plus[axis][i] * p[j] - self.c_minus[axis][i] * p[i]) / h;
            }
            if idx[axis] > 0 {
                let mut jdx = idx;
                jdx[axis] -= 1;
                let j = g.flat_index(&jdx[..d]);
                r -= (self.c_plus[axis][j] * p[i] - self.c_minus[axis][j] * p[j]) / h;
            }
        }
        r
    }

    /// `∂_t p` at every node.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        if p.len() >= PARALLEL_THRESHOLD {
            (0..p.len()).into_par_iter().map(|i| self.rate_at(p, i)).collect()
        } else {
            (0..p.len()).map(|i| self.rate_at(p, i)).collect()
        }
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if dt > self.stability_limit {
            return Err(Error::Unstable { dt, limit: self.stability_limit });
        }
        Ok(())
    }

    fn advance(&self, p: &mut Vec<f64>, dt: f64) -> Result<()> {
        let rate = self.apply(p);
        for (v, r) in p.iter_mut().zip(&rate) {
            *v += dt * r;
        }
        if let Some(bad) = p.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("density at node {bad}")));
        }
        // round-off can leave −1e−300-sized values where the density is flat zero
        for v in p.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(())
    }

    pub fn step(&self, p: &GridDensity, dt: f64) -> Result<GridDensity> {
        if !p.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch("density and operator grids differ".into()));
        }
        self.check_dt(dt)?;
        let mut v = p.values().to_vec();
        self.advance(&mut v, dt)?;
        Ok(GridDensity::from_parts_unchecked(self.grid.clone(), v, p.time() + dt))
    }
}

pub fn step(p: &GridDensity, model: &dyn DiffusionModel, dt: f64) -> Result<GridDensity> {
    FokkerPlanckOperator::new(model, p.grid())?.step(p, dt)
}

/// Snapshots every `snapshot_dt`, starting with the initial density.
#[derive(Clone, Debug)]
pub struct DensityTrajectory {
    pub snapshots: Vec<GridDensity>,
    pub dt: f64,
    pub snapshot_dt: f64,
    pub model: String,
}

impl DensityTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }

    /// Snapshot whose time label is within `1e−9` of `t`.
    pub fn at_time(&self, t: f64) -> Option<&GridDensity> {
        let k = (t / self.snapshot_dt).round();
        if k < 0.0 || (k * self.snapshot_dt - t).abs() > 1e-9 {
            return None;
        }
        self.snapshots.get(k as usize)
    }

    pub fn last(&self) -> &GridDensity {
        self.snapshots.last().expect("trajectories hold the initial snapshot")
    }
}

/// Integer number of `dt` steps in `t`, if `t` is a multiple of `dt`.
pub(crate) fn steps_in(t: f64, dt: f64) -> Option<usize> {
    let n = (t / dt).round();
    ((n * dt - t).abs() <= 1e-9 * t.abs().max(1.0) && n >= 0.0).then_some(n as usize)
}

pub fn evolve_with(op: &FokkerPlanckOperator, p0: &GridDensity, t_end: f64, dt: f64, snapshot_every: usize) -> Result<DensityTrajectory> {
    op.check_dt(dt)?;
    if snapshot_every == 0 {
        return Err(Error::InvalidParameter("snapshot_every must be at least 1".into()));
    }
    let steps = steps_in(t_end, dt)
        .ok_or_else(|| Error::InvalidParameter(format!("T = {t_end} is not a multiple of dt = {dt}")))?;
    if !p0.grid().same_as(op.grid()) {
        return Err(Error::GridMismatch("initial density and operator grids differ".into()));
    }
    let t0 = p0.time();
    let mut snapshots = vec![p0.clone()];
    let mut v = p0.values().to_vec();
    for k in 1..=steps {
        op.advance(&mut v, dt)?;
        if k % snapshot_every == 0 {
            let snap = GridDensity::from_parts_unchecked(op.grid().clone(), v.clone(), t0 + k as f64 * dt);
            let defect = (snap.mass() - p0.mass()).abs();
            if defect > 1e-9 {
                return Err(Error::NonFinite(format!("mass drifted by {defect:e} at t = {}", snap.time())));
            }
            snapshots.push(snap);
        }
    }
    Ok(DensityTrajectory { snapshots, dt, snapshot_dt: dt * snapshot_every as f64, model: op.model_name.clone() })
}

pub fn evolve(p0: &GridDensity, model: &dyn DiffusionModel, t_end: f64, dt: f64, snapshot_every: usize) -> Result<DensityTrajectory> {
    let op = FokkerPlanckOperator::new(model, p0.grid())?;
    evolve_with(&op, p0, t_end, dt, snapshot_every)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

fn log_linear_fit(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 4 {
        return Err(Error::TooFewSnapshots(samples.len()));
    }
    if let Some(&(t, _)) = samples.iter().find(|(_, h)| !(*h > 1e-14) || !h.is_finite()) {
        return Err(Error::NonPositiveEntropy(t));
    }
    let n = samples.len() as f64;
    let ys: Vec<f64> = samples.iter().map(|(_, h)| h.ln()).collect();
    let tm = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for ((t, _), y) in samples.iter().zip(&ys) {
        sxy += (t - tm) * (y - ym);
        sxx += (t - tm).powi(2);
        syy += (y - ym).powi(2);
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit { rate: -slope, r_squared, points: samples.len() })
}

fn in_window(traj: &DensityTrajectory, window: [f64; 2]) -> impl Iterator<Item = &GridDensity> {
    traj.snapshots.iter().filter(move |s| s.time() >= window[0] - 1e-12 && s.time() <= window[1] + 1e-12)
}

/// `−slope` of `ln H_U(p_t|p_∞)` over the snapshots inside `window`.
pub fn decay_rate_fit(traj: &DensityTrajectory, pinf: &GridDensity, u: &EntropyGenerator, window: [f64; 2]) -> Result<DecayFit> {
    let samples = in_window(traj, window)
        .map(|s| Ok((s.time(), evaluate_entropy(s, pinf, u)?.value)))
        .collect::<Result<Vec<_>>>()?;
    log_linear_fit(&samples)
}

/// The same fit applied to `I_U(p_t|p_∞)`.
pub fn fisher_decay_fit(
    traj: &DensityTrajectory,
    pinf: &GridDensity,
    model: &dyn DiffusionModel,
    u: &EntropyGenerator,
    window: [f64; 2],
) -> Result<DecayFit> {
    let samples = in_window(traj, window)
        .map(|s| Ok((s.time(), evaluate_fisher(s, pinf, model, u)?.value)))
        .collect::<Result<Vec<_>>>()?;
    log_linear_fit(&samples)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub h_kl: f64,
    pub h_chi2: f64,
    pub i_kl: f64,
    pub i_chi2: f64,
    pub tv: f64,
    pub mass_defect: f64,
}

pub fn trajectory_rows(traj: &DensityTrajectory, pinf: &GridDensity, model: &dyn DiffusionModel) -> Result<Vec<TrajectoryRow>> {
    let kl = EntropyGenerator::builtin(EntropyKind::Kl)?;
    let chi2 = EntropyGenerator::builtin(EntropyKind::Chi2)?;
    traj.snapshots
        .iter()
        .map(|s| {
            Ok(TrajectoryRow {
                t: s.time(),
                h_kl: evaluate_entropy(s, pinf, &kl)?.value,
                h_chi2: evaluate_entropy(s, pinf, &chi2)?.value,
                i_kl: evaluate_fisher(s, pinf, model, &kl)?.value,
                i_chi2: evaluate_fisher(s, pinf, model, &chi2)?.value,
                tv: total_variation(s, pinf)?.value,
                mass_defect: s.mass() - 1.0,
            })
        })
        .collect()
}

/// Columns `t, H_kl, H_chi2, I_kl, I_chi2, TV, mass_defect`.
pub fn write_trajectory_csv(rows: &[TrajectoryRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "t,H_kl,H_chi2,I_kl,I_chi2,TV,mass_defect")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{}", r.t, r.h_kl, r.h_chi2, r.i_kl, r.i_chi2, r.tv, r.mass_defect)?;
    }
    Ok(())
}
