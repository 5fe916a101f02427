//! Shows where a trained model attends in a few test sentences.
//!
//! ```text
//! cargo run --release --example attention_trace
//! ```

use nfetc::{synthetic, Experiment, Variant};

fn main() -> nfetc::Result<()> {
    let c = synthetic::load_bundled("overly_specific")?;
    let hp = synthetic::hyperparams(0);
    let exp = Experiment {
        forest: &c.forest,
        embeddings: &c.embeddings,
        train: &c.train,
        dev: &c.dev,
        test: &c.test,
    };
    let model = exp.run(Variant::Filtered, &hp)?.result.model;
    for m in c.test.window(hp.window).iter().take(4) {
        let trace = model.trace(m, &c.embeddings)?;
        let best = nfetc::tensor::argmax(&trace.probs).unwrap_or(0);
        println!("[{}] -> {}", m.mention_tokens().join(" "), c.forest.names()[best]);
        for (tok, a) in m.tokens.iter().zip(&trace.alpha) {
            println!("  {a:.3} {}{tok}", if *a > 0.2 { "*" } else { " " });
        }
    }
    Ok(())
}
