//! Searching the rotation-gauge amplitude that maximizes the certified rate
//! of both planar examples.
//!
//! `cargo run --release --example gauge_optimize`

use std::time::Instant;

use nibec::bakry_emery::{optimize_gauge_rate, SweepOptions};
use nibec::catalog::{
    build_example1, build_example2, example1_grid, example1_tail_bound, example2_grids, hessian_min_eigen,
    DEFAULT_ALPHA, EXAMPLE1_HALF_WIDTH,
};

fn main() -> nibec::Result<()> {
    let alpha = DEFAULT_ALPHA;
    println!("example 1: lambda_min of the Hessian at the origin = {}", hessian_min_eigen(alpha, &[0.0, 0.0]).gamma_minus);
    let t = Instant::now();
    let opts = SweepOptions { eps_lo: 0.02, eps_hi: 0.32, samples: 7, log_spacing: false, golden_iterations: 8 };
    let ex1 = optimize_gauge_rate(|e| build_example1(alpha, e), |_| Ok(vec![example1_grid(101)?]), &opts)?;
    println!(
        "  best eps {:.4}, grid inf lambda {:.4}, tail bound {:.4} ({:.1?})",
        ex1.best_eps,
        ex1.best_lambda,
        example1_tail_bound(alpha, EXAMPLE1_HALF_WIDTH),
        t.elapsed()
    );

    let t = Instant::now();
    let opts = SweepOptions { eps_lo: 0.003, eps_hi: 0.1, samples: 6, log_spacing: true, golden_iterations: 6 };
    let ex2 = optimize_gauge_rate(build_example2, |e| example2_grids(e, 421), &opts)?;
    println!("example 2: best eps {:.4}, grid inf lambda {:.4} ({:.1?})", ex2.best_eps, ex2.best_lambda, t.elapsed());
    for (e, l) in &ex2.curve {
        println!("  {e:.5} {l:.4}");
    }
    Ok(())
}
