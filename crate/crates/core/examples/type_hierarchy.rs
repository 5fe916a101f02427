//! Type-path algebra on a small forest: ancestors, path expansion, terminal
//! sets and refinement.
//!
//! ```text
//! cargo run --example type_hierarchy
//! ```

use nfetc::{RefinementMap, TypeForest};

fn main() -> nfetc::Result<()> {
    let forest = TypeForest::parse([
        "/person",
        "/person/athlete",
        "/person/coach",
        "/organization",
        "/organization/sports_team",
        "/government",
        "/government/government",
        "/product",
        "/software",
    ])?;
    println!("{} types, max depth {}", forest.len(), forest.max_depth());

    let coach = forest.id("/person/coach")?;
    let path: Vec<&str> = forest.expand_to_path(coach).into_iter().map(|t| forest.name(t)).collect();
    println!("path of /person/coach: {path:?}");

    let labels = [forest.id("/person")?, coach, forest.id("/organization")?];
    let terminals = forest.terminal_set(&labels)?;
    let names: Vec<&str> = terminals.iter().map(|&t| forest.name(t)).collect();
    println!("terminals of {{/person, /person/coach, /organization}}: {names:?}");
    println!("single type-path: {}", forest.is_single_path(&labels));

    // Indices survive refinement, so labelled corpora stay valid.
    let refined = forest.apply_refinement(&RefinementMap::figer_known())?;
    for t in forest.ids() {
        if forest.name(t) != refined.name(t) {
            println!("refined {} -> {}", forest.name(t), refined.name(t));
        }
    }
    Ok(())
}
