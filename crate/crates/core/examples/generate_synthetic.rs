//! Regenerates the synthetic corpora under `data/synthetic/`.
//!
//! ```text
//! cargo run --example generate_synthetic [-- <output-dir>]
//! ```

use std::path::PathBuf;

use nfetc::synthetic;

fn main() -> nfetc::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| synthetic::data_dir().join("synthetic"));
    for corpus in synthetic::bundled()? {
        let dir = root.join(&corpus.name);
        corpus.write_to(&dir)?;
        let stats = corpus.train.stats(&corpus.forest)?;
        println!(
            "{:<16} types={} train={} filtered={} dev={} test={} -> {}",
            corpus.name,
            corpus.forest.len(),
            corpus.train.len(),
            stats.filtered,
            corpus.dev.len(),
            corpus.test.len(),
            dir.display()
        );
    }
    Ok(())
}
