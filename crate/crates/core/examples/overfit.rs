//! Trains NFETC(f) on the bundled 200-mention corpus until it fits the
//! training set.
//!
//! ```text
//! cargo run --release --example overfit
//! ```

use nfetc::synthetic;
use nfetc::training::train_with_observer;
use nfetc::Variant;

fn main() -> nfetc::Result<()> {
    let c = synthetic::load_bundled("overfit")?;
    let hp = synthetic::hyperparams(0);
    let variant = Variant::Filtered;
    let run = train_with_observer(&c.train, &c.dev, &c.embeddings, &c.forest, &hp, &variant.loss_config(&hp), |log| {
        if log.epoch % 5 == 1 || log.dev.strict >= 0.99 {
            println!("epoch {:>3} loss {:.4} train strict {:.3}", log.epoch, log.train_loss, log.dev.strict);
        }
    })?;
    println!("best epoch {} with training strict accuracy {:.3}", run.best_epoch, run.best_dev.strict);
    Ok(())
}
