use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model::{reversed_drift, DiffusionModel};

/// Paths whose norm exceeds this are stopped and flagged.
pub const BLOW_UP: f64 = 1e8;

/// Independent stream for path `index`: the same `(seed, index)` always
/// yields the same normals, whatever the thread schedule.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Point(Vec<f64>),
    /// `N(mean, var·I)`.
    Gaussian { mean: Vec<f64>, var: f64 },
    Stationary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reversed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub t_end: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Store every `record_every`-th state (the initial state is always stored).
    pub record_every: usize,
}

/// Euler–Maruyama paths, stored path-major: `states[(p·n_times + k)·d + i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub dt: f64,
    pub record_every: usize,
    pub d: usize,
    pub n_paths: usize,
    pub states: Vec<f64>,
    pub blown_up: Vec<bool>,
    pub direction: Direction,
    pub seed: u64,
    pub model: String,
}

impl PathEnsemble {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, path: usize, k: usize) -> &[f64] {
        let o = (path * self.times.len() + k) * self.d;
        &self.states[o..o + self.d]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("ensembles hold the initial time")
    }

    /// Coordinate `axis` of every path at record `k`.
    pub fn marginal(&self, k: usize, axis: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.state(p, k)[axis]).collect()
    }
}

fn validate(o: &SimOptions) -> Result<usize> {
    if !(o.dt > 0.0) || !(o.t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and T ≥ 0, got dt = {}, T = {}", o.dt, o.t_end)));
    }
    if o.n_paths == 0 || o.record_every == 0 {
        return Err(Error::InvalidParameter("n_paths and record_every must be at least 1".into()));
    }
    let steps = crate::fokker_planck::steps_in(o.t_end, o.dt)
        .ok_or_else(|| Error::InvalidParameter(format!("T = {} is not a multiple of dt = {}", o.t_end, o.dt)))?;
    if steps % o.record_every != 0 {
        return Err(Error::InvalidParameter(format!(
            "{steps} steps are not a multiple of record_every = {}",
            o.record_every
        )));
    }
    Ok(steps)
}

fn initial_state(model: &dyn DiffusionModel, init: &Init, rng: &mut ChaCha8Rng) -> Result<Vector> {
    let d = model.dim();
    match init {
        Init::Point(x) if x.len() == d => Ok(Vector::from_slice(x)),
        Init::Gaussian { mean, var } if mean.len() == d && *var > 0.0 => {
            let sd = var.sqrt();
            Ok(Vector::from_fn(d, |i| {
                let z: f64 = StandardNormal.sample(rng);
                mean[i] + sd * z
            }))
        }
        Init::Stationary => model
            .sample_stationary(rng)
            .ok_or_else(|| Error::Unsupported(format!("{} has no stationary sampler", model.name()))),
        _ => Err(Error::InvalidParameter(format!("initial law {init:?} does not fit dimension {d}"))),
    }
}

/// Euler–Maruyama with `σ` from `model` and an arbitrary drift.
pub fn simulate_with_drift(
    model: &dyn DiffusionModel,
    drift: &(dyn Fn(&[f64]) -> Vector + Sync),
    init: &Init,
    opts: &SimOptions,
    direction: Direction,
) -> Result<PathEnsemble> {
    let steps = validate(opts)?;
    let d = model.dim();
    let q = model.noise_dim();
    let n_rec = steps / opts.record_every + 1;
    let sqdt = opts.dt.sqrt();
    let per_path: Vec<(Vec<f64>, bool)> = (0..opts.n_paths)
        .into_par_iter()
        .map(|p| -> Result<(Vec<f64>, bool)> {
            let mut rng = path_rng(opts.seed, p as u64);
            let mut x = initial_state(model, init, &mut rng)?;
            let mut out = Vec::with_capacity(n_rec * d);
            out.extend_from_slice(&x);
            let mut blown = false;
            let mut xi = Vector::zeros(q);
            for k in 1..=steps {
                if !blown {
                    let b = drift(&x);
                    let s = model.sigma(&x);
                    for v in xi.iter_mut() {
                        *v = StandardNormal.sample(&mut rng);
                    }
                    let noise = s.mul_vec(&xi);
                    for i in 0..d {
                        x[i] += b[i] * opts.dt + noise[i] * sqdt;
                    }
                    if !(x.norm() <= BLOW_UP) {
                        blown = true;
                    }
                }
                if k % opts.record_every == 0 {
                    out.extend_from_slice(&x);
                }
            }
            Ok((out, blown))
        })
        .collect::<Result<_>>()?;
    let mut states = Vec::with_capacity(opts.n_paths * n_rec * d);
    let mut blown_up = Vec::with_capacity(opts.n_paths);
    for (s, b) in per_path {
        states.extend(s);
        blown_up.push(b);
    }
    Ok(PathEnsemble {
        times: (0..n_rec).map(|k| (k * opts.record_every) as f64 * opts.dt).collect(),
        dt: opts.dt,
        record_every: opts.record_every,
        d,
        n_paths: opts.n_paths,
        states,
        blown_up,
        direction,
        seed: opts.seed,
        model: model.name(),
    })
}

pub fn simulate_forward(model: &dyn DiffusionModel, init: &Init, opts: &SimOptions) -> Result<PathEnsemble> {
    simulate_with_drift(model, &|x| model.drift(x), init, opts, Direction::Forward)
}

/// The stationary time reversal started from `p_∞`.
pub fn simulate_reversed(model: &dyn DiffusionModel, opts: &SimOptions) -> Result<PathEnsemble> {
    simulate_with_drift(model, &|x| reversed_drift(model, x), &Init::Stationary, opts, Direction::Reversed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_ou;

    #[test]
    fn same_seed_same_paths() {
        let ou = build_ou(1, 1.0, 1.0).unwrap();
        let o = SimOptions { t_end: 0.1, dt: 0.01, n_paths: 16, seed: 9, record_every: 2 };
        let a = simulate_reversed(&ou, &o).unwrap();
        let b = simulate_reversed(&ou, &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_times(), 6);
        let c = simulate_reversed(&ou, &SimOptions { seed: 10, ..o }).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn record_every_must_divide_the_step_count() {
        let ou = build_ou(1, 1.0, 1.0).unwrap();
        let o = SimOptions { t_end: 0.1, dt: 0.01, n_paths: 4, seed: 0, record_every: 3 };
        assert!(simulate_forward(&ou, &Init::Point(vec![0.0]), &o).is_err());
        let o = SimOptions { record_every: 1, ..o };
        assert!(simulate_forward(&ou, &Init::Point(vec![0.0, 1.0]), &o).is_err());
    }
}
