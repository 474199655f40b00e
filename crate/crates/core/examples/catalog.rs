//! Lists the reference models and checks the stationarity of each one.

use std::collections::BTreeMap;

use nibec::catalog::{build_model, format_catalog, list_catalog, validate_model};

fn main() -> nibec::Result<()> {
    let entries = list_catalog();
    print!("{}", format_catalog(&entries));
    println!();
    for e in &entries {
        let model = build_model(e.name, &BTreeMap::new())?;
        match validate_model(model.as_ref()) {
            Ok(()) => println!("{:<10} derivatives and stationarity check out", e.name),
            Err(err) => println!("{:<10} {err}", e.name),
        }
    }
    Ok(())
}
