//! The loss functions on hand-sized distributions: hierarchical adjustment,
//! standard cross-entropy and the candidate-selecting variant.
//!
//! ```text
//! cargo run --example hierarchical_loss
//! ```

use nfetc::loss::{cross_entropy, hierarchical_adjust, select_target, variant_cross_entropy};
use nfetc::{ParamSet, TypeForest};

fn main() -> nfetc::Result<()> {
    let forest = TypeForest::parse(["/person", "/person/athlete", "/location"])?;
    let p = [0.3, 0.4, 0.3];
    for beta in [0.0, 0.4, 1.0] {
        let q = hierarchical_adjust(&p, &forest, beta)?;
        println!("beta={beta:<3} adjusted={:.5?}", q);
    }

    let no_params = ParamSet::new();
    let athlete = forest.id("/person/athlete")?;
    let location = forest.id("/location")?;
    println!("standard CE on /person/athlete: {:.6}", cross_entropy(&p, &[athlete], &no_params, 0.0)?);

    // Candidates {athlete, location}: the variant trains on the likelier one.
    let candidates = [athlete, location];
    let chosen = select_target(&p, &candidates)?;
    println!(
        "variant CE selects {} and costs {:.6}",
        forest.name(chosen),
        variant_cross_entropy(&p, &candidates, &no_params, 0.0)?
    );
    Ok(())
}
