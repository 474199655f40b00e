//! Reference models with analytic derivatives.

pub mod bumps;
pub mod growth;
pub mod ou;
pub mod potentials;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bakry_emery::gauge::{rotation_gauge, ConstantPhase, GaugeFamily, GaugedModel, Phase, ProductPhase};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{min_symmetric_eigenvalue, Matrix, Vector};
use crate::model::{finite_difference_audit, stationarity_residual_at, DiffusionModel};

use bumps::{inspect_bump, Bump, QuinticCutoff, TwoScaleBump};
use potentials::{Example1Potential, Example2Potential, GradientModel};

pub use growth::{probe_growth_conditions, GrowthReport, Trend};
pub use ou::{build_nonreversible_ou, build_ou, divergence_residual, NonReversibleOu, OrnsteinUhlenbeck};
pub use potentials::{example1_tail_bound, example2_tail_bound, hessian_min_eigen, HessianEigen};

/// Half-width of the example-1 box.
pub const EXAMPLE1_HALF_WIDTH: f64 = 3.0;
/// Half-width of the example-2 box; the gauge lives in `[−1, 1]²`.
pub const EXAMPLE2_HALF_WIDTH: f64 = 3.0;
pub const DEFAULT_ALPHA: f64 = 0.5;

pub fn build_example1(alpha: f64, eps: f64) -> Result<GaugedModel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("example 1 needs α in (0, 1), got {alpha}")));
    }
    if !(0.0..1.0 / 3.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("example 1 needs ε in [0, 1/3), got {eps}")));
    }
    let l = EXAMPLE1_HALF_WIDTH;
    let base = GradientModel::new(Arc::new(Example1Potential { alpha }), vec![-l, -l], vec![l, l])?;
    let phi: Arc<dyn Phase> = if eps == 0.0 {
        Arc::new(ConstantPhase(0.0))
    } else {
        let bump = QuinticCutoff { eps };
        let rep = inspect_bump(&bump, eps, 20_000);
        if rep.max_abs > 2.0 * eps * (1.0 + 1e-12) || rep.identity_defect > 1e-12 {
            return Err(Error::BumpConstraint(format!("{rep:?}")));
        }
        Arc::new(ProductPhase { scale: -eps, bump: Arc::new(bump) })
    };
    rotation_gauge(Arc::new(base), GaugeFamily::rotation(phi, eps))
}

/// Slope window `[−2ε/(1−ε), 1]`, `|f| ≤ 2ε`, `f(s) = s` on `[−ε, ε]` and
/// support inside `[−1, 1]`.
pub fn check_example2_bump(eps: f64, bump: &dyn Bump) -> Result<()> {
    let rep = inspect_bump(bump, eps, 50_000);
    let tol = 1e-12;
    let violations = [
        (rep.max_abs > 2.0 * eps + tol, "|f| exceeds 2ε"),
        (rep.min_slope < -2.0 * eps / (1.0 - eps) - tol, "slope below −2ε/(1−ε)"),
        (rep.max_slope > 1.0 + tol, "slope above 1"),
        (rep.identity_defect > tol, "f(s) ≠ s on [−ε, ε]"),
        (rep.support > 1.0, "support exceeds 1"),
    ];
    match violations.iter().find(|(bad, _)| *bad) {
        Some((_, what)) => Err(Error::BumpConstraint(format!("{what} at ε = {eps}: {rep:?}"))),
        None => Ok(()),
    }
}

/// `[−L, L]²` with `nodes` per axis, `L = EXAMPLE1_HALF_WIDTH`.
pub fn example1_grid(nodes: usize) -> Result<GridSpec> {
    GridSpec::cube(2, -EXAMPLE1_HALF_WIDTH, EXAMPLE1_HALF_WIDTH, nodes)
}

/// Grids resolving the example-2 gauge at scale ε: the gauge support
/// `[−1.05, 1.05]²` at `outer` nodes per axis, the flat zone `[−3ε, 3ε]²`,
/// and the strip `|x₂| ≤ ε` at the outer `x₁` resolution. Outside the support
/// `Θ = ∇²V_ε` is bounded below by [`example2_tail_bound`].
pub fn example2_grids(eps: f64, outer: usize) -> Result<Vec<GridSpec>> {
    if !(eps > 0.0 && eps < 1.0 / 3.0) {
        return Err(Error::InvalidParameter(format!("example 2 needs ε in (0, 1/3), got {eps}")));
    }
    let r = 1.05;
    let inner = (outer * 4 / 7) | 1;
    let strip = (outer / 5) | 1;
    Ok(vec![
        GridSpec::cube(2, -r, r, outer)?,
        GridSpec::cube(2, -3.0 * eps, 3.0 * eps, inner)?,
        GridSpec::new(&[-r, -eps], &[r, eps], &[outer, strip])?,
    ])
}

pub fn build_example2(eps: f64) -> Result<GaugedModel> {
    if !(eps > 0.0 && eps < 1.0 / 3.0) {
        return Err(Error::InvalidParameter(format!("example 2 needs ε in (0, 1/3), got {eps}")));
    }
    let bump = TwoScaleBump::for_eps(eps)?;
    check_example2_bump(eps, &bump)?;
    let l = EXAMPLE2_HALF_WIDTH;
    let base = GradientModel::new(Arc::new(Example2Potential { eps }), vec![-l, -l], vec![l, l])?;
    let phi = ProductPhase { scale: -1.0, bump: Arc::new(bump) };
    rotation_gauge(Arc::new(base), GaugeFamily::rotation(Arc::new(phi), eps))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamDoc {
    pub name: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedLambda {
    pub value: f64,
    pub note: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Vec<ParamDoc>,
    pub grid_nodes: usize,
    pub expected_lambda: Option<ExpectedLambda>,
}

pub fn list_catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "ou1d",
            summary: "dX = -k X dt + s dW on the line",
            params: vec![
                ParamDoc { name: "k", default: 1.0, doc: "stiffness, > 0" },
                ParamDoc { name: "s", default: 1.0, doc: "noise amplitude, > 0" },
            ],
            grid_nodes: 512,
            expected_lambda: Some(ExpectedLambda { value: 1.0, note: "equals k" }),
        },
        CatalogEntry {
            name: "ou2d",
            summary: "isotropic Ornstein-Uhlenbeck in the plane",
            params: vec![
                ParamDoc { name: "k", default: 1.0, doc: "stiffness, > 0" },
                ParamDoc { name: "s", default: 1.0, doc: "noise amplitude, > 0" },
            ],
            grid_nodes: 96,
            expected_lambda: Some(ExpectedLambda { value: 1.0, note: "equals k" }),
        },
        CatalogEntry {
            name: "nonrev-ou",
            summary: "a = 2 nu I, b = -(Q + J) x with Q = diag(q1, q2), J = c [[0, -q2], [q1, 0]]",
            params: vec![
                ParamDoc { name: "nu", default: 0.5, doc: "half the diffusion coefficient, > 0" },
                ParamDoc { name: "q1", default: 1.0, doc: "first eigenvalue of Q, > 0" },
                ParamDoc { name: "q2", default: 4.0, doc: "second eigenvalue of Q, > 0" },
                ParamDoc { name: "c", default: 0.3, doc: "strength of the divergence-free field" },
            ],
            grid_nodes: 96,
            expected_lambda: Some(ExpectedLambda {
                value: 2.5 - 2.4525f64.sqrt(),
                note: "smallest eigenvalue of (2Q - J - J^T) / 2 at the defaults",
            }),
        },
        CatalogEntry {
            name: "example1",
            summary: "V = x1^2 + |x1 - x2|^(2+alpha) + |x2|^(2+alpha), rotation gauge phi = -eps f(x1) f(x2)",
            params: vec![
                ParamDoc { name: "alpha", default: DEFAULT_ALPHA, doc: "exponent, in (0, 1)" },
                ParamDoc { name: "eps", default: 0.2, doc: "gauge amplitude, in [0, 1/3); 0 gives sigma = I" },
            ],
            grid_nodes: 201,
            expected_lambda: Some(ExpectedLambda {
                value: 0.0,
                note: "at eps = 0 (Hessian singular at the origin); positive for small eps > 0",
            }),
        },
        CatalogEntry {
            name: "example2",
            summary: "V = x1^2 + v_eps(x2) + v_eps(x1 - x2), two-scale rotation gauge",
            params: vec![ParamDoc { name: "eps", default: 0.0075, doc: "scale of the flat zone, in (0, 1/3)" }],
            grid_nodes: 421,
            expected_lambda: Some(ExpectedLambda {
                value: 3.0 - 5f64.sqrt(),
                note: "supremum of admissible rates, 3 - sqrt 5, approached as eps -> 0",
            }),
        },
    ]
}

pub fn format_catalog(entries: &[CatalogEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!("{}\n    {}\n", e.name, e.summary));
        for p in &e.params {
            out.push_str(&format!("    {} (default {}): {}\n", p.name, p.default, p.doc));
        }
        out.push_str(&format!("    grid nodes per axis: {}\n", e.grid_nodes));
        if let Some(l) = &e.expected_lambda {
            out.push_str(&format!("    expected lambda: {} ({})\n", l.value, l.note));
        }
    }
    out
}

fn param(params: &BTreeMap<String, f64>, allowed: &[ParamDoc], name: &str) -> f64 {
    params
        .get(name)
        .copied()
        .unwrap_or_else(|| allowed.iter().find(|p| p.name == name).map_or(f64::NAN, |p| p.default))
}

/// Builds a catalog model by name, with defaults for omitted parameters.
pub fn build_model(name: &str, params: &BTreeMap<String, f64>) -> Result<Arc<dyn DiffusionModel>> {
    let entry = list_catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::config("model.name", format!("unknown model `{name}`")))?;
    if let Some(bad) = params.keys().find(|k| !entry.params.iter().any(|p| p.name == k.as_str())) {
        return Err(Error::config(format!("model.params.{bad}"), format!("not a parameter of `{name}`")));
    }
    let p = |n: &str| param(params, &entry.params, n);
    let model: Arc<dyn DiffusionModel> = match name {
        "ou1d" => Arc::new(build_ou(1, p("k"), p("s"))?),
        "ou2d" => Arc::new(build_ou(2, p("k"), p("s"))?),
        "nonrev-ou" => {
            let (q1, q2, c) = (p("q1"), p("q2"), p("c"));
            let q = Matrix::diagonal(&[q1, q2]);
            let j = Matrix::from_rows(&[&[0.0, -q2], &[q1, 0.0]]).scale(c);
            Arc::new(build_nonreversible_ou(p("nu"), q, j)?)
        }
        "example1" => Arc::new(build_example1(p("alpha"), p("eps"))?),
        "example2" => Arc::new(build_example2(p("eps"))?),
        _ => unreachable!(),
    };
    validate_model(model.as_ref())?;
    Ok(model)
}

/// Closed-form rate `inf λ` for the linear models; `None` for the others.
pub fn exact_lambda(name: &str, params: &BTreeMap<String, f64>) -> Result<Option<f64>> {
    let Some(entry) = list_catalog().into_iter().find(|e| e.name == name) else {
        return Err(Error::config("model.name", format!("unknown model `{name}`")));
    };
    let p = |n: &str| param(params, &entry.params, n);
    Ok(match name {
        "ou1d" | "ou2d" => Some(p("k")),
        "nonrev-ou" => {
            let (q1, q2, c) = (p("q1"), p("q2"), p("c"));
            let j = Matrix::from_rows(&[&[0.0, -q2], &[q1, 0.0]]).scale(c);
            let m = build_nonreversible_ou(p("nu"), Matrix::diagonal(&[q1, q2]), j)?;
            Some(min_symmetric_eigenvalue(&m.expected_theta()) / (2.0 * m.nu()))
        }
        _ => None,
    })
}

/// Stationarity residual at most `1e−6` on a 9ᵈ lattice of the recommended box
/// and analytic derivatives within `1e−4` of central differences at a few
/// generic points.
pub fn validate_model(model: &dyn DiffusionModel) -> Result<()> {
    let d = model.dim();
    let (lo, hi) = model.recommended_box();
    let lattice: Vec<Vector> = (0..9usize.pow(d as u32))
        .map(|mut k| {
            Vector::from_fn(d, |i| {
                let j = k % 9;
                k /= 9;
                // per-axis offsets keep the lattice off the kinks at x₂ = 0 and x₁ = x₂
                let t = (j as f64 + 0.37 + 0.21 * i as f64) / 9.0;
                lo[i] + (hi[i] - lo[i]) * t
            })
        })
        .collect();
    for x in &lattice {
        let r = stationarity_residual_at(model, x);
        if !(r.abs() <= 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "{}: stationarity residual {r:e} at {x:?}",
                model.name()
            )));
        }
    }
    let probes: Vec<Vector> = lattice.iter().step_by(7).map(|x| x.scale(0.3)).collect();
    let audit = finite_difference_audit(model, &probes, 1e-5)?;
    if audit.max_deviation() > 1e-4 {
        return Err(Error::InvalidParameter(format!("{}: derivative audit failed: {audit:?}", model.name())));
    }
    Ok(())
}
