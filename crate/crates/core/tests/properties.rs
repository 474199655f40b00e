use nibec::bakry_emery::{
    assemble_theta, assemble_theta_sigma_form, gamma12_direct, gamma_from_sigma, lambda_delta_matrix,
    pencil_min_eigenvalue, GammaPair,
};
use nibec::catalog::{build_example1, build_ou};
use nibec::entropy::{EntropyGenerator, EntropyKind};
use nibec::experiment::Verdict;
use nibec::fokker_planck::{gaussian, project_density, FokkerPlanckOperator};
use nibec::grid::GridSpec;
use nibec::linalg::{min_generalized_eigenvalue, min_symmetric_eigenvalue, Matrix, Tensor3};
use nibec::model::DiffusionModel;
use nibec::monte_carlo::{path_rng, simulate_reversed, SimOptions};
use proptest::prelude::*;
use rand::Rng;

fn unit() -> impl Strategy<Value = f64> {
    -1.0f64..1.0
}

fn sigma_data() -> impl Strategy<Value = (Matrix, Tensor3, [f64; 2], Matrix)> {
    (prop::array::uniform4(unit()), prop::array::uniform8(unit()), prop::array::uniform2(unit()), prop::array::uniform3(unit()))
        .prop_map(|(s, ds, g, h)| {
            let s = Matrix::from_rows(&[&[s[0], s[1]], &[s[2], s[3]]]);
            let mut t = Tensor3::zeros(2, 2, 2);
            for (n, v) in ds.iter().enumerate() {
                t[(n / 4, (n / 2) % 2, n % 2)] = *v;
            }
            let h = Matrix::from_rows(&[&[h[0], h[1]], &[h[1], h[2]]]);
            (s, t, g, h)
        })
}

fn entropy_with_four_derivatives() -> impl Strategy<Value = EntropyGenerator> {
    prop_oneof![
        Just(EntropyKind::Kl),
        Just(EntropyKind::Chi2),
        (1.05f64..2.0).prop_map(EntropyKind::Power),
    ]
    .prop_map(|k| EntropyGenerator::builtin(k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gamma_is_positive_semidefinite((s, ds, g, h) in sigma_data()) {
        let gamma = gamma_from_sigma(&s, &ds, &g, &h);
        let scale = gamma.max_abs().max(1.0);
        prop_assert!(min_symmetric_eigenvalue(&gamma) >= -1e-12 * scale);
    }

    #[test]
    fn gamma12_has_two_equal_forms((s, ds, g, h) in sigma_data()) {
        let gamma = gamma_from_sigma(&s, &ds, &g, &h);
        prop_assert!((gamma[(0, 1)] - gamma12_direct(&s, &ds, &g, &h)).abs() < 1e-12);
    }

    #[test]
    fn trace_product_is_nonnegative(
        (s, ds, g, h) in sigma_data(),
        u in entropy_with_four_derivatives(),
        r in 0.0f64..50.0,
        delta in 1e-3f64..1.0,
    ) {
        let ld = lambda_delta_matrix(&u, r, delta).unwrap();
        prop_assert!(min_symmetric_eigenvalue(&ld) >= -1e-12 * ld.max_abs().max(1.0));
        let pair = GammaPair::new(gamma_from_sigma(&s, &ds, &g, &h), ld);
        let scale = pair.gamma.max_abs().max(1.0) * ld.max_abs().max(1.0);
        prop_assert!(pair.trace_product >= -1e-10 * scale);
    }

    #[test]
    fn theta_forms_agree_under_the_gauge(eps in 0.01f64..0.3, x0 in -1.2f64..1.2, x1 in -1.2f64..1.2) {
        let m = build_example1(0.5, eps).unwrap();
        let a = assemble_theta(&m, &[x0, x1]).unwrap();
        let b = assemble_theta_sigma_form(&m, &[x0, x1]).unwrap();
        prop_assert!((a - b).max_abs() < 1e-9);
    }

    #[test]
    fn pencil_eigenvalue_is_tight(t in prop::array::uniform3(-3.0f64..3.0), b in prop::array::uniform4(unit())) {
        let theta = Matrix::from_rows(&[&[t[0], t[1]], &[t[1], t[2]]]);
        let bm = Matrix::from_rows(&[&[b[0], b[1]], &[b[2], b[3]]]);
        let a = bm.transpose() * bm + Matrix::identity(2).scale(0.1);
        let lam = pencil_min_eigenvalue(&theta, &a, &[0.0, 0.0]).unwrap();
        prop_assert_eq!(Some(lam), min_generalized_eigenvalue(&theta, &a));
        let shifted = theta - a.scale(lam);
        let e = min_symmetric_eigenvalue(&shifted);
        prop_assert!(e.abs() < 1e-9 * theta.max_abs().max(1.0) * 10.0);
    }

    #[test]
    fn entropy_generators_vanish_at_one_and_are_convex(u in entropy_with_four_derivatives(), r in 0.0f64..20.0, s in 0.0f64..20.0) {
        prop_assert!(u.u(1.0).abs() < 1e-14);
        prop_assert!(u.u(r) >= -1e-14);
        let mid = u.u(0.5 * (r + s));
        prop_assert!(mid <= 0.5 * (u.u(r) + u.u(s)) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fp_steps_keep_mass_and_positivity(
        k in 0.3f64..3.0,
        mean in -1.5f64..1.5,
        var in 0.05f64..1.0,
        frac in 0.05f64..1.0,
        steps in 1usize..60,
    ) {
        let ou = build_ou(1, k, 1.0).unwrap();
        let (lo, hi) = ou.recommended_box();
        let grid = GridSpec::new(&lo, &hi, &[201]).unwrap();
        let op = FokkerPlanckOperator::new(&ou, &grid).unwrap();
        let mut p = project_density(gaussian(vec![mean], var), &grid).unwrap();
        let m0 = p.mass();
        let dt = frac * op.stability_limit();
        for _ in 0..steps {
            p = op.step(&p, dt).unwrap();
        }
        prop_assert!((p.mass() - m0).abs() < 1e-12);
        prop_assert!(p.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn reversed_paths_are_reproducible(seed in any::<u64>(), n_paths in 1usize..40) {
        let ou = build_ou(1, 1.0, 1.0).unwrap();
        let opts = SimOptions { t_end: 0.1, dt: 0.01, n_paths, seed, record_every: 2 };
        let a = simulate_reversed(&ou, &opts).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate_reversed(&ou, &opts).unwrap());
        prop_assert_eq!(&a.states, &b.states);
        prop_assert_eq!(a.n_times(), 6);
    }

    #[test]
    fn verdict_passes_iff_every_check_passes(flags in prop::collection::vec(any::<bool>(), 0..8)) {
        let mut v = Verdict::default();
        for (i, f) in flags.iter().enumerate() {
            v.push(format!("c{i}"), i as f64, 0.0, *f);
        }
        prop_assert_eq!(v.passed(), !flags.is_empty() && flags.iter().all(|f| *f));
    }
}

#[test]
fn path_streams_are_distinct() {
    let mut a = path_rng(5, 0);
    let mut b = path_rng(5, 1);
    let mut c = path_rng(5, 0);
    let xa: Vec<u64> = (0..4).map(|_| a.random()).collect();
    let xb: Vec<u64> = (0..4).map(|_| b.random()).collect();
    let xc: Vec<u64> = (0..4).map(|_| c.random()).collect();
    assert_ne!(xa, xb);
    assert_eq!(xa, xc);
}

#[test]
fn gauge_leaves_the_diffusion_matrix_alone() {
    let plain = build_example1(0.5, 0.0).unwrap();
    let gauged = build_example1(0.5, 0.2).unwrap();
    for x in [[0.0, 0.0], [0.1, -0.05], [0.3, 0.2], [2.0, -1.0]] {
        let s = gauged.sigma(&x);
        assert!((s * s.transpose() - Matrix::identity(2)).max_abs() < 1e-14);
        assert_eq!(plain.drift(&x), gauged.drift(&x));
    }
}
