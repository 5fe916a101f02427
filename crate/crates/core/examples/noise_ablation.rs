//! Five-seed comparisons on the two noisy synthetic corpora:
//! hierarchical normalisation against overly specific labels, and raw
//! training data against filtering when labels span several type-paths.
//!
//! ```text
//! cargo run --release --example noise_ablation
//! ```

use nfetc::{synthetic, Experiment, Variant};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn main() -> nfetc::Result<()> {
    let hp = synthetic::hyperparams(0);
    for (name, variants) in [
        ("overly_specific", [Variant::Filtered, Variant::FilteredHier]),
        ("out_of_context", [Variant::Filtered, Variant::Raw]),
    ] {
        let c = synthetic::load_bundled(name)?;
        let exp = Experiment {
            forest: &c.forest,
            embeddings: &c.embeddings,
            train: &c.train,
            dev: &c.dev,
            test: &c.test,
        };
        println!("{name}:");
        for v in variants {
            let agg = exp.run_seeds(v, &hp, &SEEDS)?;
            print!("  {:<14} {}", v.name(), agg.to_report());
        }
    }
    Ok(())
}
