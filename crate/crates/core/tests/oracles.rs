//! Grid and Monte Carlo quantities against closed forms for Gaussians.

use std::collections::BTreeMap;

use approx::assert_relative_eq;
use nibec::bakry_emery::inf_lambda_on_grid;
use nibec::catalog::{build_model, build_ou, example2_tail_bound, exact_lambda, hessian_min_eigen};
use nibec::entropy::{evaluate_entropy, evaluate_fisher, total_variation, EntropyGenerator, EntropyKind};
use nibec::fokker_planck::{evolve, gaussian, project_density, stationary_density};
use nibec::grid::{GridDensity, GridSpec};
use nibec::model::{reversed_drift, DiffusionModel};
use nibec::monte_carlo::path_rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn ou_setup(k: f64, s: f64) -> (nibec::catalog::OrnsteinUhlenbeck, GridSpec, GridDensity) {
    let ou = build_ou(1, k, s).unwrap();
    let (lo, hi) = ou.recommended_box();
    let grid = GridSpec::new(&lo, &hi, &[1025]).unwrap();
    let pinf = stationary_density(&ou, &grid).unwrap();
    (ou, grid, pinf)
}

#[test]
fn gaussian_entropies_match_closed_forms() {
    let (k, s) = (1.3, 0.9);
    let (ou, grid, pinf) = ou_setup(k, s);
    let w = ou.stationary_variance();
    assert_relative_eq!(w, s * s / (2.0 * k), max_relative = 1e-15);
    let (m, v) = (0.7, 0.6 * w);
    let p = project_density(gaussian(vec![m], v), &grid).unwrap();

    let kl_exact = 0.5 * (v / w + m * m / w - 1.0 - (v / w).ln());
    let kl = EntropyGenerator::builtin(EntropyKind::Kl).unwrap();
    assert_relative_eq!(evaluate_entropy(&p, &pinf, &kl).unwrap().value, kl_exact, max_relative = 1e-6);

    // ∫p²/q − 1 for N(m, v) against N(0, w), valid for 2w > v.
    let chi2_exact = w / (v * (2.0 * w - v)).sqrt() * (m * m / (2.0 * w - v)).exp() - 1.0;
    let chi2 = EntropyGenerator::builtin(EntropyKind::Chi2).unwrap();
    assert_relative_eq!(evaluate_entropy(&p, &pinf, &chi2).unwrap().value, chi2_exact, max_relative = 1e-6);

    // ½∫ a |∇ log ρ|² p with ∇ log ρ = (1/w − 1/v)x + m/v.
    let c = 1.0 / w - 1.0 / v;
    let fisher_exact = 0.5 * s * s * ((m / w).powi(2) + c * c * v);
    let fisher = evaluate_fisher(&p, &pinf, &ou, &kl).unwrap().value;
    assert_relative_eq!(fisher, fisher_exact, max_relative = 1e-4);
}

#[test]
fn total_variation_of_shifted_gaussians() {
    let (ou, grid, pinf) = ou_setup(1.0, 1.0);
    let sd = ou.stationary_variance().sqrt();
    let m = 0.4;
    let p = project_density(gaussian(vec![m], sd * sd), &grid).unwrap();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let exact = 2.0 * (2.0 * normal.cdf(m / (2.0 * sd)) - 1.0);
    assert_relative_eq!(total_variation(&p, &pinf).unwrap().value, exact, max_relative = 1e-4);
}

#[test]
fn chi2_along_the_ou_flow() {
    // From N(1, ½) under dX = −X dt + dW the law is N(e^{−t}, ½), so
    // H_chi2(t) = exp(2e^{−2t}) − 1.
    let ou = build_ou(1, 1.0, 1.0).unwrap();
    let (lo, hi) = ou.recommended_box();
    let grid = GridSpec::new(&lo, &hi, &[257]).unwrap();
    let pinf = stationary_density(&ou, &grid).unwrap();
    let p0 = project_density(gaussian(vec![1.0], 0.5), &grid).unwrap();
    let traj = evolve(&p0, &ou, 1.0, 2.5e-4, 400).unwrap();
    let chi2 = EntropyGenerator::builtin(EntropyKind::Chi2).unwrap();
    for s in &traj.snapshots {
        let exact = (2.0 * (-2.0 * s.time()).exp()).exp() - 1.0;
        let h = evaluate_entropy(s, &pinf, &chi2).unwrap().value;
        assert_relative_eq!(h, exact, max_relative = 5e-3);
    }
}

#[test]
fn reversed_ou_drift_is_the_forward_drift() {
    let ou = build_ou(1, 2.0, 0.7).unwrap();
    for x in [-1.0, 0.0, 0.5, 3.0] {
        assert_relative_eq!(reversed_drift(&ou, &[x])[0], ou.drift(&[x])[0], epsilon = 1e-14);
    }
}

#[test]
fn stationary_sampler_has_the_right_variance() {
    let ou = build_ou(1, 1.5, 1.2).unwrap();
    let mut rng = path_rng(11, 0);
    let n = 200_000;
    let xs: Vec<f64> = (0..n).map(|_| ou.sample_stationary(&mut rng).unwrap()[0]).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let w = ou.stationary_variance();
    // Five standard errors of the sample variance, 2w²/n.
    assert!((var - w).abs() < 5.0 * w * (2.0 / n as f64).sqrt());
    assert!(mean.abs() < 5.0 * (w / n as f64).sqrt());
}

#[test]
fn nonreversible_rate_on_the_grid_matches_the_eigenvalue() {
    let params = BTreeMap::new();
    let m = build_model("nonrev-ou", &params).unwrap();
    let exact = exact_lambda("nonrev-ou", &params).unwrap().unwrap();
    // ν = ½, Q = diag(1, 4), J = 0.3[[0, −4], [1, 0]]: Θ/(2ν) = [[1, 0.45], [0.45, 4]].
    let hand = 2.5 - (1.5f64 * 1.5 + 0.45 * 0.45).sqrt();
    assert_relative_eq!(exact, hand, max_relative = 1e-12);
    let grid = GridSpec::cube(2, -2.0, 2.0, 21).unwrap();
    let (inf, _) = inf_lambda_on_grid(m.as_ref(), &grid).unwrap();
    assert_relative_eq!(inf, exact, max_relative = 1e-10);
}

#[test]
fn hessian_eigen_on_the_diagonal() {
    // κ₁ = 0 on x₁ = x₂, so γ₋ = 1 + κ₂/2 − |κ₂/2 − 1| = min(κ₂, 2).
    for x in [0.0, 0.1, 0.4, 1.0, 2.5, -0.7] {
        let e = hessian_min_eigen(0.5, &[x, x]);
        assert_eq!(e.kappa1, 0.0);
        assert_relative_eq!(e.gamma_minus, e.kappa2.min(2.0), epsilon = 1e-14);
    }
    assert_eq!(hessian_min_eigen(0.5, &[0.0, 0.0]).gamma_minus, 0.0);
    assert_relative_eq!(example2_tail_bound(), 3.0 - 5f64.sqrt(), epsilon = 1e-15);
}
