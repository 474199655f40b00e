use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bakry_emery::{inf_lambda_on_grid, lambda_delta_matrix, nibec_lambda, optimize_gauge_rate, SweepOptions};
use crate::catalog::{
    build_example1, build_example2, build_model, example1_grid, example1_tail_bound, example2_grids,
    example2_tail_bound, exact_lambda, format_catalog, hessian_min_eigen, list_catalog, DEFAULT_ALPHA,
};
use crate::entropy::{
    check_admissibility, evaluate_entropy, evaluate_fisher, total_variation, tv_dissipation_rhs, EntropyGenerator,
};
use crate::error::{Error, Result};
use crate::fokker_planck::{
    decay_rate_fit, evolve_with, fisher_decay_fit, gaussian, project_density, stationary_density, trajectory_rows,
    write_trajectory_csv, DensityTrajectory, FokkerPlanckOperator,
};
use crate::grid::{GridDensity, GridSpec};
use crate::linalg::min_symmetric_eigenvalue;
use crate::model::{reversed_drift, DiffusionModel};
use crate::monte_carlo::{
    density_ratio_process, entropy_consistency, exponential_girsanov_process, martingale_diagnostics,
    median_relative_deviation, simulate_reversed, simulate_with_drift, Direction, Init, SimOptions,
};

use super::config::{ExperimentConfig, ExperimentKind};
use super::verdict::Verdict;

/// Everything checked before any artifact is written.
struct Prepared {
    model: Arc<dyn DiffusionModel>,
    grid: GridSpec,
}

fn as_config_error(key: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    }
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let model = build_model(&cfg.model.name, &cfg.model.params).map_err(|e| as_config_error("model.params", e))?;
    let d = model.dim();
    let (blo, bhi) = model.recommended_box();
    let entry_nodes = list_catalog().into_iter().find(|e| e.name == cfg.model.name).map_or(101, |e| e.grid_nodes);
    let lo = cfg.grid.lo.clone().unwrap_or(blo);
    let hi = cfg.grid.hi.clone().unwrap_or(bhi);
    let nodes = match cfg.grid.nodes.as_deref() {
        None => vec![entry_nodes; d],
        Some([n]) => vec![*n; d],
        Some(n) => n.to_vec(),
    };
    let grid = GridSpec::new(&lo, &hi, &nodes).map_err(|e| as_config_error("grid", e))?;
    if grid.dim() != d {
        return Err(Error::config("grid", format!("model dimension is {d}, grid dimension {}", grid.dim())));
    }
    if let Some(m) = &cfg.initial.mean {
        if m.len() != d {
            return Err(Error::config("initial.mean", format!("needs {d} entries")));
        }
    }
    if cfg.experiment == ExperimentKind::GaugeOptimize && !matches!(cfg.model.name.as_str(), "example1" | "example2") {
        return Err(Error::config("model.name", "gauge-optimize needs example1 or example2"));
    }
    Ok(Prepared { model, grid })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Runs the experiment, writing its CSVs and `verdict.csv` into the output
/// directory. Config errors are reported before anything is written; on a
/// numerical failure the partial verdict gets a failing `error` row.
pub fn run(cfg: &ExperimentConfig) -> Result<Verdict> {
    let prep = prepare(cfg)?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let mut verdict = Verdict::default();
    let outcome = match cfg.experiment {
        ExperimentKind::ThetaScan => theta_scan(cfg, &prep, &dir, &mut verdict),
        ExperimentKind::GaugeOptimize => gauge_optimize(cfg, &dir, &mut verdict),
        ExperimentKind::FpDecay => fp_decay(cfg, &prep, &dir, &mut verdict),
        ExperimentKind::DissipationIdentity => dissipation_identity(cfg, &prep, &dir, &mut verdict),
        ExperimentKind::TvDissipation => tv_dissipation(cfg, &prep, &dir, &mut verdict),
        ExperimentKind::McMartingale => mc_martingale(cfg, &prep, &dir, &mut verdict),
        ExperimentKind::Admissibility => admissibility(cfg, &dir, &mut verdict),
        ExperimentKind::Catalog => catalog(&dir, &mut verdict),
    };
    if outcome.is_err() {
        verdict.push("error", f64::NAN, f64::NAN, false);
    }
    verdict.write_csv(create(&dir, "verdict.csv")?)?;
    outcome.map(|_| verdict)
}

/// 0 pass, 1 failed check, 2 config or I/O error, 3 numerical failure.
pub fn exit_code(result: &Result<Verdict>) -> i32 {
    match result {
        Ok(v) if v.passed() => 0,
        Ok(_) => 1,
        Err(e) if e.is_numerical() => 3,
        Err(_) => 2,
    }
}

pub fn run_path(path: &Path) -> Result<Verdict> {
    run(&ExperimentConfig::load(path)?)
}

/// Largest stable step that puts `per` steps into every `spacing`.
fn substeps(op: &FokkerPlanckOperator, spacing: f64) -> (f64, usize) {
    let per = (spacing / op.stability_limit()).ceil().max(1.0) as usize;
    (spacing / per as f64, per)
}

struct Evolution {
    traj: DensityTrajectory,
    pinf: GridDensity,
}

fn evolve_config(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Evolution> {
    let model = prep.model.as_ref();
    let grid = &prep.grid;
    let op = FokkerPlanckOperator::new(model, grid)?;
    let d = model.dim();
    let mean = cfg.initial.mean.clone().unwrap_or_else(|| {
        let mut m = vec![0.0; d];
        m[0] = 1.0;
        m
    });
    let p0 = project_density(gaussian(mean, cfg.initial.var), grid)?;
    let every = cfg.time.snapshot_every;
    let dt = match cfg.time.dt {
        Some(dt) => dt,
        None => {
            let steps = (cfg.time.t_end / op.stability_limit()).ceil() as usize;
            cfg.time.t_end / (steps.div_ceil(every) * every) as f64
        }
    };
    let traj = evolve_with(&op, &p0, cfg.time.t_end, dt, every).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::config("time", m),
        other => other,
    })?;
    Ok(Evolution { traj, pinf: stationary_density(model, grid)? })
}

/// The exact rate when known, else the grid infimum of the NIBEC eigenvalue.
fn reference_lambda(cfg: &ExperimentConfig, prep: &Prepared) -> Result<f64> {
    match exact_lambda(&cfg.model.name, &cfg.model.params)? {
        Some(l) => Ok(l),
        None => Ok(inf_lambda_on_grid(prep.model.as_ref(), &prep.grid)?.0),
    }
}

fn kind_name(u: &EntropyGenerator) -> String {
    u.name().replace(['(', ')'], "")
}

fn theta_scan(cfg: &ExperimentConfig, prep: &Prepared, dir: &Path, v: &mut Verdict) -> Result<()> {
    let model = prep.model.as_ref();
    let field = nibec_lambda(model, &prep.grid)?;
    field.write_csv(create(dir, "theta_field.csv")?)?;
    match exact_lambda(&cfg.model.name, &cfg.model.params)? {
        Some(exact) => {
            let tol = cfg.tolerance("lambda_abs");
            v.push("inf_lambda", field.inf_lambda, exact, (field.inf_lambda - exact).abs() <= tol);
        }
        None => v.above("inf_lambda", field.inf_lambda, cfg.tolerance("min_lambda")),
    }
    v.at_most("certificate_violation", field.certificate_violation(model, 8, 0), cfg.tolerance("certificate"));
    let half = prep.grid.lo().iter().zip(prep.grid.hi()).map(|(l, h)| l.abs().min(h.abs())).fold(f64::INFINITY, f64::min);
    match cfg.model.name.as_str() {
        "example1" => {
            let alpha = cfg.model.params.get("alpha").copied().unwrap_or(DEFAULT_ALPHA);
            v.at_least("tail_bound", example1_tail_bound(alpha, half), field.inf_lambda);
        }
        "example2" => v.at_least("tail_bound", example2_tail_bound(), field.inf_lambda),
        _ => {}
    }
    Ok(())
}

fn gauge_optimize(cfg: &ExperimentConfig, dir: &Path, v: &mut Verdict) -> Result<()> {
    let g = &cfg.gauge;
    let opts = SweepOptions {
        eps_lo: g.eps_lo,
        eps_hi: g.eps_hi,
        samples: g.samples,
        log_spacing: g.log_spacing,
        golden_iterations: g.golden_iterations,
    };
    let min_lambda = cfg.tolerance("min_lambda");
    let (opt, verify_grids, tail) = if cfg.model.name == "example1" {
        let alpha = cfg.model.params.get("alpha").copied().unwrap_or(DEFAULT_ALPHA);
        let opt = optimize_gauge_rate(|e| build_example1(alpha, e), |_| Ok(vec![example1_grid(g.nodes)?]), &opts)
            .map_err(|e| as_config_error("gauge", e))?;
        v.at_most("classic_lambda_at_origin", hessian_min_eigen(alpha, &[0.0, 0.0]).gamma_minus.abs(), 0.0);
        let l = crate::catalog::EXAMPLE1_HALF_WIDTH;
        (opt, vec![example1_grid(g.verify_nodes)?], example1_tail_bound(alpha, l))
    } else {
        let opt = optimize_gauge_rate(build_example2, |e| example2_grids(e, g.nodes), &opts)
            .map_err(|e| as_config_error("gauge", e))?;
        let grids = example2_grids(opt.best_eps, g.verify_nodes)?;
        (opt, grids, example2_tail_bound())
    };
    opt.write_csv(create(dir, "gauge_sweep.csv")?)?;
    v.at_least("best_lambda", opt.best_lambda, min_lambda);
    let model: Arc<dyn DiffusionModel> = if cfg.model.name == "example1" {
        let alpha = cfg.model.params.get("alpha").copied().unwrap_or(DEFAULT_ALPHA);
        Arc::new(build_example1(alpha, opt.best_eps)?)
    } else {
        Arc::new(build_example2(opt.best_eps)?)
    };
    let mut verified = f64::INFINITY;
    for (i, grid) in verify_grids.iter().enumerate() {
        let field = nibec_lambda(model.as_ref(), grid)?;
        if i == 0 {
            field.write_csv(create(dir, "theta_field.csv")?)?;
        }
        verified = verified.min(field.inf_lambda);
    }
    v.at_least("verified_lambda", verified, min_lambda);
    v.above("verified_lambda_positive", verified, 0.0);
    v.at_least("tail_bound", tail, verified);
    Ok(())
}

fn fp_decay(cfg: &ExperimentConfig, prep: &Prepared, dir: &Path, v: &mut Verdict) -> Result<()> {
    let model = prep.model.as_ref();
    let Evolution { traj, pinf } = evolve_config(cfg, prep)?;
    write_trajectory_csv(&trajectory_rows(&traj, &pinf, model)?, create(dir, "trajectory.csv")?)?;
    let lambda = reference_lambda(cfg, prep)?;
    let rate = 2.0 * lambda;
    let rel = cfg.tolerance("rate_rel");
    let slack = cfg.tolerance("sobolev_slack");
    for u in cfg.entropies()? {
        if u.derivative(2, 1.0).is_none() {
            continue;
        }
        let name = kind_name(&u);
        let fit = decay_rate_fit(&traj, &pinf, &u, cfg.entropy.window)?;
        v.push(format!("rate_{name}"), fit.rate, rate, (fit.rate - rate).abs() <= rel * rate);
        let fisher = fisher_decay_fit(&traj, &pinf, model, &u, cfg.entropy.window)?;
        v.at_least(format!("fisher_rate_{name}"), fisher.rate, rate * (1.0 - rel));
        let mut worst = 0.0f64;
        for s in &traj.snapshots {
            let h = evaluate_entropy(s, &pinf, &u)?.value;
            let i = evaluate_fisher(s, &pinf, model, &u)?.value;
            worst = worst.max(if i > 0.0 { h * rate / i } else if h > 0.0 { f64::INFINITY } else { 0.0 });
        }
        v.at_most(format!("sobolev_{name}"), worst, 1.0 + slack);
    }
    Ok(())
}

/// Indices of `count` snapshots spread over the window, keeping one
/// neighbour on each side for centred differences.
fn probe_indices(traj: &DensityTrajectory, window: [f64; 2], count: usize) -> Vec<usize> {
    let n = traj.snapshots.len();
    let inside: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&k| {
            let t = traj.snapshots[k].time();
            t >= window[0] - 1e-12 && t <= window[1] + 1e-12
        })
        .collect();
    if inside.len() <= count {
        return inside;
    }
    (0..count).map(|j| inside[j * (inside.len() - 1) / (count - 1).max(1)]).collect()
}

fn dissipation_identity(cfg: &ExperimentConfig, prep: &Prepared, dir: &Path, v: &mut Verdict) -> Result<()> {
    let model = prep.model.as_ref();
    let Evolution { traj, pinf } = evolve_config(cfg, prep)?;
    let idx = probe_indices(&traj, cfg.entropy.window, cfg.entropy.samples);
    if idx.len() < 2 {
        return Err(Error::config("entropy.window", "fewer than two interior snapshots inside the window"));
    }
    let mut w = create(dir, "dissipation.csv")?;
    writeln!(w, "t,kind,dH_dt,I,rel_err")?;
    let tol = cfg.tolerance("rel");
    for u in cfg.entropies()? {
        if u.derivative(2, 1.0).is_none() {
            continue;
        }
        let name = kind_name(&u);
        let mut worst = 0.0f64;
        for &k in &idx {
            let (a, b) = (&traj.snapshots[k - 1], &traj.snapshots[k + 1]);
            let dh = (evaluate_entropy(b, &pinf, &u)?.value - evaluate_entropy(a, &pinf, &u)?.value) / (b.time() - a.time());
            let i = evaluate_fisher(&traj.snapshots[k], &pinf, model, &u)?.value;
            let err = (dh + i).abs() / i;
            worst = worst.max(err);
            writeln!(w, "{},{},{},{},{}", traj.snapshots[k].time(), name, dh, i, err)?;
        }
        v.at_most(format!("dissipation_{name}"), worst, tol);
    }
    w.flush()?;
    Ok(())
}

fn tv_dissipation(cfg: &ExperimentConfig, prep: &Prepared, dir: &Path, v: &mut Verdict) -> Result<()> {
    let model = prep.model.as_ref();
    let Evolution { traj, pinf } = evolve_config(cfg, prep)?;
    let tv: Vec<f64> = traj.snapshots.iter().map(|s| total_variation(s, &pinf).map(|r| r.value)).collect::<Result<_>>()?;
    let rhs: Vec<f64> =
        traj.snapshots.iter().map(|s| tv_dissipation_rhs(s, &pinf, model).map(|r| r.value)).collect::<Result<_>>()?;
    let mut w = create(dir, "tv_dissipation.csv")?;
    writeln!(w, "t,TV,rhs,dTV_dt,rel_err")?;
    let idx = probe_indices(&traj, cfg.entropy.window, cfg.entropy.samples);
    let mut worst = 0.0f64;
    for k in 0..traj.snapshots.len() {
        let t = traj.snapshots[k].time();
        let (dtv, err) = if idx.contains(&k) {
            let dtv = (tv[k + 1] - tv[k - 1]) / (traj.snapshots[k + 1].time() - traj.snapshots[k - 1].time());
            let err = (dtv - rhs[k]).abs() / rhs[k].abs();
            worst = worst.max(err);
            (dtv, err)
        } else {
            (f64::NAN, f64::NAN)
        };
        writeln!(w, "{t},{},{},{dtv},{err}", tv[k], rhs[k])?;
    }
    w.flush()?;
    if idx.is_empty() {
        return Err(Error::config("entropy.window", "no interior snapshots inside the window"));
    }
    v.at_most("tv_rhs_rel_err", worst, cfg.tolerance("rel"));
    v.at_most("tv_rhs_max", rhs.iter().copied().fold(f64::NEG_INFINITY, f64::max), cfg.tolerance("rhs_max"));
    Ok(())
}

/// Grid trajectory whose snapshots fall on every record time of an ensemble
/// with step `dt` recording every `record_every` steps.
fn matched_trajectory(
    model: &dyn DiffusionModel,
    p0: &GridDensity,
    t_end: f64,
    spacing: f64,
) -> Result<DensityTrajectory> {
    let op = FokkerPlanckOperator::new(model, p0.grid())?;
    let (dt, per) = substeps(&op, spacing);
    evolve_with(&op, p0, t_end, dt, per)
}

fn mc_martingale(cfg: &ExperimentConfig, prep: &Prepared, dir: &Path, v: &mut Verdict) -> Result<()> {
    let model = prep.model.as_ref();
    let d = model.dim();
    let mc = &cfg.mc;
    let mean = cfg.initial.mean.clone().unwrap_or_else(|| {
        let mut m = vec![0.0; d];
        m[0] = 1.0;
        m
    });
    let p0 = project_density(gaussian(mean, cfg.initial.var), &prep.grid)?;
    let pinf = stationary_density(model, &prep.grid)?;
    let t_end = cfg.time.t_end;
    let traj = matched_trajectory(model, &p0, t_end, mc.dt * mc.record_every as f64)
        .map_err(|e| as_config_error("mc", e))?;
    let opts = SimOptions { t_end, dt: mc.dt, n_paths: mc.n_paths, seed: mc.seed, record_every: mc.record_every };
    let ens = simulate_reversed(model, &opts).map_err(|e| as_config_error("mc", e))?;
    let ratios = density_ratio_process(&ens, &traj, &pinf)?;
    drop(ens);
    let kinds = cfg.entropies()?;
    let mut reports = Vec::new();
    for u in &kinds {
        reports.push(martingale_diagnostics(&ratios, u)?);
    }
    reports[0].write_csv(create(dir, "mc_summary.csv")?)?;
    v.at_most("mean_d_z", reports[0].max_mean_deviation_z(), cfg.tolerance("mean_z"));
    v.push("drift_z", reports[0].max_drift_z(), cfg.tolerance("drift_z"), reports[0].max_drift_z() < cfg.tolerance("drift_z"));
    v.at_most("clamped_fraction", ratios.overall_clamped_fraction(), cfg.tolerance("clamped"));
    let se = cfg.tolerance("submartingale_se");
    for (u, rep) in kinds.iter().zip(&reports) {
        let name = kind_name(u);
        let worst = rep.ud_step_z.iter().copied().fold(f64::INFINITY, f64::min);
        v.at_least(format!("submartingale_{name}"), worst, -se);
        if u.derivative(2, 1.0).is_some() {
            let cons = entropy_consistency(rep, &traj, &pinf, u)?;
            v.at_most(format!("entropy_consistency_{name}"), cons.max_z(), cfg.tolerance("entropy_z"));
        }
    }

    if mc.negative_control {
        let shift = mc.control_shift;
        let shifted = |x: &[f64]| {
            let mut b = reversed_drift(model, x);
            for i in 0..d {
                b[i] += shift;
            }
            b
        };
        let bad = simulate_with_drift(model, &shifted, &Init::Stationary, &opts, Direction::Reversed)?;
        let bad = martingale_diagnostics(&density_ratio_process(&bad, &traj, &pinf)?, &kinds[0])?;
        bad.write_csv(create(dir, "mc_control_summary.csv")?)?;
        v.above("control_drift_z", bad.max_drift_z(), cfg.tolerance("drift_z"));
    }

    if let Some(g) = &cfg.girsanov {
        let mut w = create(dir, "girsanov.csv")?;
        writeln!(w, "dt,median_rel_dev,mean_D_hat")?;
        let mut medians = Vec::new();
        for &dt in &g.dts {
            let traj = matched_trajectory(model, &p0, g.t_end, dt).map_err(|e| as_config_error("girsanov", e))?;
            let opts = SimOptions { t_end: g.t_end, dt, n_paths: g.n_paths, seed: mc.seed, record_every: 1 };
            let ens = simulate_reversed(model, &opts).map_err(|e| as_config_error("girsanov", e))?;
            let exact = density_ratio_process(&ens, &traj, &pinf)?;
            let expo = exponential_girsanov_process(&ens, &traj, &pinf, model)?;
            let med = median_relative_deviation(&exact, &expo)?;
            let last = expo.n_times() - 1;
            let mean_hat = (0..expo.n_paths).map(|p| expo.at(p, last)).sum::<f64>() / expo.n_paths as f64;
            writeln!(w, "{dt},{med},{mean_hat}")?;
            medians.push(med);
        }
        w.flush()?;
        let finest = *medians.last().expect("validated non-empty");
        v.at_most("girsanov_median", finest, cfg.tolerance("girsanov_median"));
        if medians.len() > 1 {
            let decreasing = medians.windows(2).all(|p| p[1] < p[0]);
            v.push("girsanov_refinement", finest / medians[0], 1.0, decreasing);
        }
    }
    Ok(())
}

fn admissibility(cfg: &ExperimentConfig, dir: &Path, v: &mut Verdict) -> Result<()> {
    let samples: Vec<f64> = (0..=200).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 200.0)).collect();
    let mut w = create(dir, "admissibility.csv")?;
    writeln!(w, "kind,h7_ok,h7prime_ok,worst_margin,lambda_delta_min")?;
    for u in cfg.entropies()? {
        let name = kind_name(&u);
        let rep = check_admissibility(&u, &samples);
        v.push(format!("h7_{name}"), rep.h7_ok as u8 as f64, 1.0, rep.h7_ok);
        let mut ld_min = f64::NAN;
        if u.max_order() >= 4 {
            v.push(format!("h7prime_{name}"), rep.worst_relative_margin, -1e-12, rep.h7prime_ok);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.mc.seed);
            ld_min = f64::INFINITY;
            for _ in 0..1000 {
                let r = 10f64.powf(rng.random_range(-3.0..3.0));
                let delta = 10f64.powf(rng.random_range(-3.0..0.0));
                let m = lambda_delta_matrix(&u, r, delta)?;
                ld_min = ld_min.min(min_symmetric_eigenvalue(&m) / m.max_abs().max(1.0));
            }
            v.at_least(format!("lambda_delta_psd_{name}"), ld_min, -1e-10);
        }
        writeln!(w, "{name},{},{},{},{ld_min}", rep.h7_ok, rep.h7prime_ok, rep.worst_margin)?;
    }
    w.flush()?;
    Ok(())
}

fn catalog(dir: &Path, v: &mut Verdict) -> Result<()> {
    let entries = list_catalog();
    fs::write(dir.join("catalog.txt"), format_catalog(&entries))?;
    for e in &entries {
        let ok = build_model(e.name, &Default::default()).is_ok();
        v.push(format!("builds_{}", e.name), ok as u8 as f64, 1.0, ok);
    }
    Ok(())
}

/// Files an experiment writes besides `verdict.csv`.
pub fn artifacts(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::ThetaScan => &["theta_field.csv"],
        ExperimentKind::GaugeOptimize => &["gauge_sweep.csv", "theta_field.csv"],
        ExperimentKind::FpDecay => &["trajectory.csv"],
        ExperimentKind::DissipationIdentity => &["dissipation.csv"],
        ExperimentKind::TvDissipation => &["tv_dissipation.csv"],
        ExperimentKind::McMartingale => &["mc_summary.csv", "mc_control_summary.csv", "girsanov.csv"],
        ExperimentKind::Admissibility => &["admissibility.csv"],
        ExperimentKind::Catalog => &["catalog.txt"],
    }
}

/// Paths of the artifacts present in `dir`.
pub fn written_artifacts(kind: ExperimentKind, dir: &Path) -> Vec<PathBuf> {
    artifacts(kind).iter().map(|f| dir.join(f)).filter(|p| p.exists()).collect()
}
