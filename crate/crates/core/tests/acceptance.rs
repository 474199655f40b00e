//! End-to-end acceptance run. Prints one `pass`/`FAIL` line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nibec::bakry_emery::{
    assemble_theta, assemble_theta_sigma_form, gamma_from_sigma, lambda_delta_matrix, theta_rotation_closed_form,
    GammaPair,
};
use nibec::catalog::potentials::{Example1Potential, Potential};
use nibec::catalog::{build_example1, build_model, build_nonreversible_ou, exact_lambda, hessian_min_eigen, list_catalog};
use nibec::entropy::{evaluate_entropy, evaluate_fisher, EntropyGenerator, EntropyKind};
use nibec::experiment::{run, ExperimentConfig, Verdict};
use nibec::fokker_planck::{evolve, gaussian, project_density, stationary_density};
use nibec::grid::GridSpec;
use nibec::linalg::{cholesky, lower_triangular_inverse, min_symmetric_eigenvalue, Matrix, Tensor3};
use nibec::model::DiffusionModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load(name: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&configs().join(name)).expect("shipped configs parse");
    cfg.output_dir = out.join(name.trim_end_matches(".toml"));
    cfg
}

fn run_cfg(cfg: &ExperimentConfig) -> Verdict {
    match run(cfg) {
        Ok(v) => v,
        Err(e) => {
            let mut v = Verdict::default();
            v.push(format!("error: {e}"), f64::NAN, f64::NAN, false);
            v
        }
    }
}

fn value(v: &Verdict, name: &str) -> f64 {
    v.get(name).map_or(f64::NAN, |c| c.value)
}

fn check_passes(v: &Verdict, name: &str) -> bool {
    v.get(name).is_some_and(|c| c.pass)
}

fn summarize(v: &Verdict, names: &[&str]) -> String {
    names.iter().map(|n| format!("{n}={:.4e}", value(v, n))).collect::<Vec<_>>().join(" ")
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let b = Matrix::from_fn(d, d, |_, _| uniform(rng, -1.0, 1.0));
    (b.transpose() * b) + Matrix::identity(d).scale(0.2)
}

fn inverse_spd(q: &Matrix) -> Matrix {
    let l = cholesky(q).expect("spd");
    let li = lower_triangular_inverse(&l);
    li.transpose() * li
}

fn c1_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let d = if rng.random_bool(0.5) { 2 } else { 3 };
        let nu = uniform(&mut rng, 0.2, 2.0);
        let q = random_spd(&mut rng, d);
        let k = Matrix::from_fn(d, d, |_, _| uniform(&mut rng, -1.0, 1.0));
        let k = k - k.transpose();
        let j = inverse_spd(&q) * k;
        let m = build_nonreversible_ou(nu, q, j).expect("divergence condition holds by construction");
        let x: Vec<f64> = (0..d).map(|_| uniform(&mut rng, -3.0, 3.0)).collect();
        let expected = (q.scale(2.0) - j - j.transpose()).scale(nu);
        let th = assemble_theta(&m, &x).expect("theta");
        worst = worst.max((th - expected).max_abs());
    }
    Outcome { pass: worst < 1e-10, detail: format!("max |Θ − ν(2∇²V − ∇F − ∇F*)| = {worst:.3e} (< 1e-10)") }
}

fn c2_dual_assembly() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let mut worst_model = "";
    for e in list_catalog() {
        let m = build_model(e.name, &BTreeMap::new()).expect("catalog defaults build");
        let (lo, hi) = m.recommended_box();
        for i in 0..500 {
            // Half the points where the gauges act, half anywhere in the box.
            let x: Vec<f64> = (0..m.dim())
                .map(|k| if i % 2 == 0 { uniform(&mut rng, -1.1, 1.1) } else { uniform(&mut rng, lo[k], hi[k]) })
                .collect();
            let a = assemble_theta(m.as_ref(), &x).expect("theta");
            let b = assemble_theta_sigma_form(m.as_ref(), &x).expect("sigma form");
            let dev = (a - b).max_abs();
            if dev > worst {
                worst = dev;
                worst_model = e.name;
            }
        }
    }
    Outcome { pass: worst < 1e-8, detail: format!("max deviation {worst:.3e} (< 1e-8, worst on {worst_model})") }
}

fn c3_rotation_closed_form() -> Outcome {
    let alpha = 0.5;
    let m = build_example1(alpha, 0.05).expect("example 1");
    let v = Example1Potential { alpha };
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let x = [uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0)];
        let (_, dphi, hphi) = m.phase(&x);
        let closed = theta_rotation_closed_form(&v.gradient(&x), &v.hessian(&x), &dphi, &hphi);
        let general = assemble_theta(&m, &x).expect("theta");
        worst = worst.max((closed - general).max_abs());
    }
    Outcome { pass: worst < 1e-8, detail: format!("max deviation {worst:.3e} (< 1e-8)") }
}

fn c4_separation(out: &Path) -> Outcome {
    let classic = hessian_min_eigen(0.5, &[0.0, 0.0]).gamma_minus;
    let cfg = load("example1_gauge.toml", out);
    let v = run_cfg(&cfg);
    let on_201 = cfg.gauge.nodes == 201 && value(&v, "best_lambda") > 0.0;
    let pass = classic == 0.0
        && on_201
        && check_passes(&v, "verified_lambda_positive")
        && check_passes(&v, "tail_bound");
    Outcome {
        pass,
        detail: format!(
            "λ_min(∇²V(0)) = {classic}, {} (201² search grid, 401² verify grid)",
            summarize(&v, &["best_lambda", "verified_lambda", "tail_bound"])
        ),
    }
}

fn c5_example2(out: &Path) -> Outcome {
    let cfg = load("example2_gauge.toml", out);
    let v = run_cfg(&cfg);
    let best = value(&v, "best_lambda");
    let verified = value(&v, "verified_lambda");
    let cap = 3.0 - 5f64.sqrt();
    let pass = best >= 0.70 && verified >= 0.70 && verified < cap && check_passes(&v, "tail_bound");
    Outcome { pass, detail: format!("best {best:.4}, verified {verified:.4} (≥ 0.70, below 3 − √5 = {cap:.4})") }
}

fn c6_decay(out: &Path) -> (Outcome, Verdict) {
    let cfg = load("ou_fp_decay.toml", out);
    let v = run_cfg(&cfg);
    let rates = ["rate_kl", "rate_chi2"].iter().all(|n| (1.9..=2.1).contains(&value(&v, n)));
    let fisher = ["fisher_rate_kl", "fisher_rate_chi2"].iter().all(|n| value(&v, n) >= 1.9);
    let o = Outcome {
        pass: rates && fisher,
        detail: summarize(&v, &["rate_kl", "rate_chi2", "fisher_rate_kl", "fisher_rate_chi2"]),
    };
    (o, v)
}

fn c7_dissipation(out: &Path) -> Outcome {
    let cfg = load("ou_dissipation.toml", out);
    let v = run_cfg(&cfg);
    let pass = cfg.entropy.samples == 10
        && ["dissipation_kl", "dissipation_chi2"].iter().all(|n| value(&v, n) < 0.02);
    Outcome { pass, detail: format!("{} (< 0.02 at 10 times)", summarize(&v, &["dissipation_kl", "dissipation_chi2"])) }
}

/// Worst `H·2λ/I` over a trajectory of a certified 2-D model.
fn sobolev_ratio_2d(name: &str, nodes: usize) -> f64 {
    let params = BTreeMap::new();
    let model = build_model(name, &params).expect("catalog model");
    let lambda = exact_lambda(name, &params).expect("known").expect("certified");
    let (lo, hi) = model.recommended_box();
    let grid = GridSpec::new(&lo, &hi, &[nodes, nodes]).expect("grid");
    let p0 = project_density(gaussian(vec![1.0, -0.5], 0.3), &grid).expect("p0");
    let pinf = stationary_density(model.as_ref(), &grid).expect("pinf");
    let traj = evolve(&p0, model.as_ref(), 1.5, 5e-4, 100).expect("evolve");
    let mut worst = 0.0f64;
    for kind in [EntropyKind::Kl, EntropyKind::Chi2] {
        let u = EntropyGenerator::builtin(kind).expect("builtin");
        for s in &traj.snapshots {
            let h = evaluate_entropy(s, &pinf, &u).expect("H").value;
            let i = evaluate_fisher(s, &pinf, model.as_ref(), &u).expect("I").value;
            worst = worst.max(h * 2.0 * lambda / i);
        }
    }
    worst
}

fn c8_sobolev(decay: &Verdict) -> Outcome {
    let ou1 = ["sobolev_kl", "sobolev_chi2"].iter().map(|n| value(decay, n)).fold(0.0, f64::max);
    let ou2 = sobolev_ratio_2d("ou2d", 61);
    let nonrev = sobolev_ratio_2d("nonrev-ou", 61);
    let worst = ou1.max(ou2).max(nonrev);
    Outcome {
        pass: worst <= 1.02,
        detail: format!("max H·2λ/I: ou1d {ou1:.4}, ou2d {ou2:.4}, nonrev-ou {nonrev:.4} (≤ 1.02)"),
    }
}

fn c9_tv(out: &Path) -> Outcome {
    let cfg = load("ou_tv.toml", out);
    let v = run_cfg(&cfg);
    let pass = value(&v, "tv_rhs_rel_err") < 0.05 && value(&v, "tv_rhs_max") <= 0.0;
    Outcome { pass, detail: format!("{} (< 0.05, ≤ 0)", summarize(&v, &["tv_rhs_rel_err", "tv_rhs_max"])) }
}

fn c10_martingale(v: &Verdict, cfg: &ExperimentConfig) -> Outcome {
    let setup = cfg.mc.n_paths == 100_000 && cfg.mc.dt == 1e-3 && cfg.time.t_end == 2.0;
    let pass = setup
        && value(v, "mean_d_z") < 3.0
        && ["entropy_consistency_kl", "entropy_consistency_chi2"].iter().all(|n| value(v, n) <= 3.0)
        && ["submartingale_kl", "submartingale_chi2"].iter().all(|n| value(v, n) >= -2.0)
        && value(v, "control_drift_z") > 4.0
        && check_passes(v, "clamped_fraction");
    Outcome {
        pass,
        detail: summarize(
            v,
            &[
                "mean_d_z",
                "drift_z",
                "entropy_consistency_kl",
                "entropy_consistency_chi2",
                "submartingale_kl",
                "submartingale_chi2",
                "control_drift_z",
            ],
        ),
    }
}

fn c11_girsanov(v: &Verdict, cfg: &ExperimentConfig) -> Outcome {
    let finest = cfg.girsanov.as_ref().and_then(|g| g.dts.last().copied());
    let pass = finest == Some(1e-4) && value(v, "girsanov_median") < 5e-2 && check_passes(v, "girsanov_refinement");
    Outcome { pass, detail: format!("{} (< 5e-2 at dt = 1e-4)", summarize(v, &["girsanov_median", "girsanov_refinement"])) }
}

fn c12_structure(out: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let kl = EntropyGenerator::builtin(EntropyKind::Kl).unwrap();
    let chi2 = EntropyGenerator::builtin(EntropyKind::Chi2).unwrap();
    let (mut gamma_min, mut ld_min, mut tr_min) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..1000 {
        let d = 2;
        let s = Matrix::from_fn(d, d, |_, _| uniform(&mut rng, -1.0, 1.0));
        let mut ds = Tensor3::zeros(d, d, d);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    ds[(a, b, c)] = uniform(&mut rng, -1.0, 1.0);
                }
            }
        }
        let grad = [uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0)];
        let h = Matrix::from_fn(d, d, |_, _| uniform(&mut rng, -1.0, 1.0)).symmetric_part();
        let gamma = gamma_from_sigma(&s, &ds, &grad, &h);
        gamma_min = gamma_min.min(min_symmetric_eigenvalue(&gamma));
        let r = 10f64.powf(uniform(&mut rng, -3.0, 2.0));
        let delta = 10f64.powf(uniform(&mut rng, -3.0, 0.0));
        for u in [&kl, &chi2] {
            let ld = lambda_delta_matrix(u, r, delta).unwrap();
            ld_min = ld_min.min(min_symmetric_eigenvalue(&ld) / ld.max_abs().max(1.0));
            tr_min = tr_min.min(GammaPair::new(gamma, ld).trace_product);
        }
    }
    let v = run_cfg(&load("admissibility.toml", out));
    let pass = gamma_min >= -1e-10 && ld_min >= -1e-10 && tr_min >= -1e-10 && v.passed();
    Outcome {
        pass,
        detail: format!(
            "min eig Γ {gamma_min:.3e}, min eig Λ_δ {ld_min:.3e}, min tr(Λ_δΓ) {tr_min:.3e}, admissibility run {}",
            if v.passed() { "pass" } else { "FAIL" }
        ),
    }
}

fn c13_gamma_minus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1313);
    let (mut worst, mut violations) = (0.0f64, 0);
    for _ in 0..1000 {
        let alpha = uniform(&mut rng, 0.05, 0.95);
        let x = [uniform(&mut rng, -3.0, 3.0), uniform(&mut rng, -3.0, 3.0)];
        let e = hessian_min_eigen(alpha, &x);
        let direct = min_symmetric_eigenvalue(&Example1Potential { alpha }.hessian(&x));
        worst = worst.max((e.gamma_minus - direct).abs());
        if e.gamma_minus < e.lower_bound - 1e-12 {
            violations += 1;
        }
    }
    Outcome {
        pass: worst < 1e-10 && violations == 0,
        detail: format!("max |γ₋ − eig| = {worst:.3e} (< 1e-10), bound violations {violations}"),
    }
}

fn artifact_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("output dir") {
        let p = entry.expect("entry").path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).expect("read"));
    }
    out
}

fn c14_determinism(out: &Path) -> Outcome {
    let mut differing = Vec::new();
    let names: Vec<String> = {
        let mut v: Vec<String> = fs::read_dir(configs())
            .expect("configs")
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        v.sort();
        v
    };
    for name in &names {
        let mut a = load(name, &out.join("first"));
        let mut b = load(name, &out.join("second"));
        // The full martingale suite is covered by criterion 10; a smaller
        // ensemble keeps the rerun cheap without changing the code path.
        for cfg in [&mut a, &mut b] {
            cfg.mc.n_paths = cfg.mc.n_paths.min(5000);
        }
        run_cfg(&a);
        // The second run uses a single thread, so scheduling cannot leak in.
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
        pool.install(|| run_cfg(&b));
        if artifact_bytes(&a.output_dir) != artifact_bytes(&b.output_dir) {
            differing.push(name.clone());
        }
    }
    Outcome {
        pass: differing.is_empty() && !names.is_empty(),
        detail: format!("{} configs rerun, differing: {:?}", names.len(), differing),
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let out = tmp.path();
    let mut all = true;
    let mut report = |id: u32, title: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let in_time = limit.is_none_or(|l| took <= l);
        let pass = o.pass && in_time;
        all &= pass;
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        println!(
            "{:>4}  criterion {id:>2}  {title}: {}  [{:.1}s{budget}]",
            if pass { "pass" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
    };
    let secs = |s: u64| Some(Duration::from_secs(s));

    report(1, "Θ closed form on non-reversible OU", secs(1), &mut c1_closed_form);
    report(2, "Θ dual assembly on the catalog", secs(5), &mut c2_dual_assembly);
    report(3, "rotation-gauge closed form, example 1", secs(5), &mut c3_rotation_closed_form);
    report(4, "classic vs gauged rate, example 1", secs(120), &mut || c4_separation(out));
    report(5, "gauged rate ≥ 0.70, example 2", secs(180), &mut || c5_example2(out));
    let mut decay = Verdict::default();
    report(6, "OU entropy and Fisher decay rates", secs(60), &mut || {
        let (o, v) = c6_decay(out);
        decay = v;
        o
    });
    report(7, "dissipation identity on OU", secs(60), &mut || c7_dissipation(out));
    report(8, "convex Sobolev inequality", None, &mut || c8_sobolev(&decay));
    report(9, "TV dissipation on OU", secs(60), &mut || c9_tv(out));

    let mc_cfg = load("ou_martingale.toml", out);
    let start = Instant::now();
    let mc = run_cfg(&mc_cfg);
    let mc_time = start.elapsed();
    // The martingale and Girsanov parts share one run, which must fit either budget.
    report(10, "Monte Carlo martingale suite", None, &mut || {
        let mut o = c10_martingale(&mc, &mc_cfg);
        o.pass &= mc_time <= Duration::from_secs(180);
        o.detail += &format!(" (shared run {:.1}s / 180s)", mc_time.as_secs_f64());
        o
    });
    report(11, "exponential Girsanov form", None, &mut || c11_girsanov(&mc, &mc_cfg));
    report(12, "structure matrices Γ and Λ_δ", None, &mut || c12_structure(out));
    report(13, "closed-form γ₋", None, &mut c13_gamma_minus);
    report(14, "byte-identical reruns", None, &mut || c14_determinism(&out.join("determinism")));

    if !all {
        std::process::exit(1);
    }
}
