//! Grid infimum of the generalized eigenvalue of (Θ, a) for the reference
//! models, next to the known rate where there is one.

use std::collections::BTreeMap;

use nibec::bakry_emery::nibec_lambda;
use nibec::catalog::{build_model, exact_lambda, list_catalog};
use nibec::grid::GridSpec;

fn main() -> nibec::Result<()> {
    let params = BTreeMap::new();
    for entry in list_catalog() {
        let model = build_model(entry.name, &params)?;
        let (lo, hi) = model.recommended_box();
        // Coarse grids keep this quick; the experiment configs use the catalog sizes.
        let n = vec![entry.grid_nodes.min(101); model.dim()];
        let field = nibec_lambda(model.as_ref(), &GridSpec::new(&lo, &hi, &n)?)?;
        let exact = exact_lambda(entry.name, &params)?.map_or("-".to_string(), |l| format!("{l:.6}"));
        println!(
            "{:<10} inf λ = {:>10.6} at {:?}  exact {exact}",
            entry.name,
            field.inf_lambda,
            field.argmin_point()
        );
    }
    Ok(())
}
