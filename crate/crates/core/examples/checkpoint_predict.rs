//! Trains a model, saves and reloads its checkpoint, predicts a few
//! unlabelled mentions and exports the type weight rows as CSV.
//!
//! ```text
//! cargo run --release --example checkpoint_predict
//! ```

use nfetc::cli::{cmd_predict, export_types};
use nfetc::{synthetic, Checkpoint, Experiment, Variant};

fn main() -> nfetc::Result<()> {
    let c = synthetic::load_bundled("overly_specific")?;
    let exp = Experiment {
        forest: &c.forest,
        embeddings: &c.embeddings,
        train: &c.train,
        dev: &c.dev,
        test: &c.test,
    };
    let run = exp.run(Variant::FilteredHier, &synthetic::hyperparams(0))?;
    print!("test: {}", run.test.to_report());

    let path = std::env::temp_dir().join("nfetc-example-checkpoint.txt");
    Checkpoint::new(run.result.model, &c.forest)?.save(&path)?;
    let ck = Checkpoint::load(&path)?;
    println!("reloaded {} ({} types)", path.display(), ck.types.len());

    // Corpus format without the labels column.
    let input: String = c
        .test
        .to_text(&c.forest)
        .lines()
        .take(3)
        .map(|l| format!("{}\n", l.rsplit_once('\t').map_or(l, |(head, _)| head)))
        .collect();
    print!("{}", cmd_predict(&ck, &c.embeddings, &input, "example")?);

    let csv = export_types(&ck)?;
    for line in csv.lines().take(3) {
        println!("{}...", &line[..line.len().min(72)]);
    }
    Ok(())
}
