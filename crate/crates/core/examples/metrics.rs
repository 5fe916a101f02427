//! Strict accuracy and loose macro/micro F1 on a few gold/predicted pairs.
//!
//! ```text
//! cargo run --example metrics
//! ```

use nfetc::{EvalPair, Metrics, TypeForest};

fn main() -> nfetc::Result<()> {
    let forest = TypeForest::parse(["/person", "/person/athlete", "/location", "/location/city"])?;
    let id = |n: &str| forest.id(n);
    let pairs = vec![
        // Predicting the parent of the gold terminal.
        EvalPair::from_prediction(&[id("/person")?, id("/person/athlete")?], id("/person")?, &forest)?,
        EvalPair::from_prediction(&[id("/location")?, id("/location/city")?], id("/location/city")?, &forest)?,
        // A prediction more specific than the gold label.
        EvalPair::from_prediction(&[id("/location")?], id("/location/city")?, &forest)?,
    ];
    let first = Metrics::from_pairs(&pairs[..1])?;
    println!("gold {{person, athlete}} / pred {{person}}: P={} R={} F1={:.6}", first.macro_p, first.macro_r, first.macro_f1);
    print!("all pairs: {}", Metrics::from_pairs(&pairs)?.to_report());
    Ok(())
}
