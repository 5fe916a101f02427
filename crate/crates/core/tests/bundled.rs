use nfetc::synthetic;

#[test]
fn bundled_files_match_the_generator() {
    let stale = synthetic::stale_bundled_files().unwrap();
    assert!(stale.is_empty(), "regenerate with `cargo run --example generate_synthetic`: {stale:?}");
}

#[test]
fn bundled_corpora_load() {
    for name in ["overfit", "overly_specific", "out_of_context"] {
        let c = synthetic::load_bundled(name).unwrap();
        let fresh = synthetic::bundled().unwrap().into_iter().find(|b| b.name == name).unwrap();
        assert_eq!(c.train.mentions, fresh.train.mentions, "{name}");
        assert_eq!(c.test.mentions, fresh.test.mentions, "{name}");
    }
}
