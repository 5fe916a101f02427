//! Checks every parameter's analytic gradient against central differences
//! on a small fixed instance.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use nfetc::gradcheck::{check_gradients, Toy};

fn main() -> nfetc::Result<()> {
    let toy = Toy::new(7)?;
    let loss = Toy::hier_raw_loss();
    for (label, dropout) in [("no dropout", None), ("fixed dropout mask", Some(1))] {
        let report = check_gradients(&toy.model, &toy.problem(&loss, dropout), 1e-5)?;
        println!("{label}: {} values", report.values_checked());
        for p in &report.params {
            println!("  {:<24} n={:<4} rel={:.2e} abs={:.2e}", p.name, p.values, p.max_rel_error, p.max_abs_error);
        }
        println!("  max relative error {:.2e}", report.max_rel_error());
    }
    Ok(())
}
