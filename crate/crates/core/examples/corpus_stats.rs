//! Loads the bundled mini corpus and prints its summary, the filtered
//! subset and a dev split.
//!
//! ```text
//! cargo run --example corpus_stats
//! ```

use nfetc::synthetic::data_dir;
use nfetc::{Corpus, TypeForest};

fn main() -> nfetc::Result<()> {
    let dir = data_dir().join("mini");
    let forest = TypeForest::from_file(&dir.join("types.txt"))?;
    let corpus = Corpus::from_file(&dir.join("corpus.txt"), &forest)?;
    print!("{}", corpus.stats(&forest)?.to_kv());

    println!("\nmulti-path mentions, dropped by filtering:");
    for m in corpus.iter().filter(|m| !m.is_single_path(&forest)) {
        let labels: Vec<&str> = m.labels.iter().map(|&t| forest.name(t)).collect();
        println!("  {:<24} {}", m.mention_tokens().join(" "), labels.join(" "));
    }
    let filtered = corpus.build_filtered(&forest)?;
    println!("filtered corpus keeps {} of {}", filtered.len(), corpus.len());

    let (dev, rest) = corpus.split_dev(0.25, 0)?;
    println!("dev split: {} dev, {} evaluation", dev.len(), rest.len());
    Ok(())
}
