//! The Γ and Λ_δ matrices for a few entropies, and the admissibility of each
//! generator on a log-spaced range of ratios.

use nibec::bakry_emery::{gamma_from_sigma, lambda_delta_matrix, GammaPair};
use nibec::entropy::{check_admissibility, EntropyGenerator, EntropyKind};
use nibec::linalg::{min_symmetric_eigenvalue, Matrix, Tensor3};

fn main() -> nibec::Result<()> {
    let s = Matrix::from_rows(&[&[1.0, 0.3], &[-0.2, 0.8]]);
    let mut ds = Tensor3::zeros(2, 2, 2);
    ds[(0, 0, 1)] = 0.4;
    ds[(1, 1, 0)] = -0.25;
    let hess = Matrix::from_rows(&[&[0.6, -0.1], &[-0.1, -0.9]]);
    let gamma = gamma_from_sigma(&s, &ds, &[0.5, -0.3], &hess);
    println!("Γ = {gamma:?}, smallest eigenvalue {:.4e}", min_symmetric_eigenvalue(&gamma));

    let ratios: Vec<f64> = (0..=60).map(|k| 10f64.powf(-3.0 + 0.1 * k as f64)).collect();
    for kind in [EntropyKind::Kl, EntropyKind::Chi2, EntropyKind::Power(1.5), EntropyKind::Tv] {
        let u = EntropyGenerator::builtin(kind)?;
        let rep = check_admissibility(&u, &ratios);
        print!("{:<12} H7 {:<5} H7' {:<5}", u.name(), rep.h7_ok, rep.h7prime_ok);
        match lambda_delta_matrix(&u, 2.0, 0.1) {
            Ok(ld) => {
                let pair = GammaPair::new(gamma, ld);
                println!("  tr(Λ_δ Γ) at r = 2, δ = 0.1: {:.4e}", pair.trace_product);
            }
            Err(e) => println!("  {e}"),
        }
    }
    Ok(())
}
