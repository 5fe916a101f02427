mod common;

use std::collections::BTreeSet;

use nfetc::config::{Config, Profile};
use nfetc::corpus::Provenance;
use nfetc::loss::{adjust_with, hierarchical_adjust};
use nfetc::model::{ModelConfig, Nfetc};
use nfetc::{seeded_rng, Checkpoint, Corpus, EvalPair, Mention, Metrics, TypeForest, TypeId};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn forest_from_seed(seed: u64) -> (Vec<String>, TypeForest) {
    let names = common::random_forest(&mut seeded_rng(seed), 50, 4);
    let forest = TypeForest::parse(names.iter().map(String::as_str)).unwrap();
    (names, forest)
}

fn name_set(forest: &TypeForest, ids: &[TypeId]) -> BTreeSet<String> {
    ids.iter().map(|&t| forest.name(t).to_string()).collect()
}

fn random_subset(rng: &mut impl Rng, n: usize, max: usize) -> Vec<TypeId> {
    let k = rng.random_range(1..=max.min(n));
    (0..k).map(|_| TypeId(rng.random_range(0..n))).collect()
}

fn random_corpus(seed: u64, forest: &TypeForest, size: usize) -> Corpus {
    let mut rng = seeded_rng(seed);
    let mentions = (0..size)
        .map(|k| {
            let len = rng.random_range(1..30);
            let start = rng.random_range(0..len);
            let end = rng.random_range(start + 1..=len);
            let tokens = (0..len).map(|i| format!("m{k}w{i}")).collect();
            let labels = random_subset(&mut rng, forest.len(), 4);
            Mention::new(tokens, start, end, labels, forest).unwrap()
        })
        .collect();
    Corpus::new(mentions, Provenance::Raw)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn forest_parse_is_stable(seed in any::<u64>()) {
        let (names, forest) = forest_from_seed(seed);
        prop_assert_eq!(forest.names(), &names[..]);
        let again = TypeForest::parse_text(&names.join("\n")).unwrap();
        prop_assert_eq!(again, forest.clone());
        for t in forest.ids() {
            let n = forest.name(t);
            prop_assert_eq!(forest.depth(t), n.matches('/').count());
            prop_assert_eq!(name_set(&forest, &forest.ancestors(t)), common::strict_prefixes(n));
        }
    }

    #[test]
    fn terminal_sets_match_prefix_oracle(seed in any::<u64>()) {
        let (_, forest) = forest_from_seed(seed);
        let mut rng = seeded_rng(seed ^ 0x5eed);
        for _ in 0..10 {
            let set = random_subset(&mut rng, forest.len(), 6);
            let names = name_set(&forest, &set);
            let terms = forest.terminal_set(&set).unwrap();
            prop_assert_eq!(name_set(&forest, &terms), common::terminals(&names));
            prop_assert_eq!(forest.terminal_set(&terms).unwrap(), terms.clone());
            let expanded: Vec<TypeId> = terms.iter().flat_map(|&t| forest.expand_to_path(t)).collect();
            prop_assert_eq!(name_set(&forest, &expanded), common::closure(&names));
            prop_assert_eq!(forest.terminal_set(&expanded).unwrap(), terms);
        }
    }

    #[test]
    fn adjusted_distribution_matches_oracle(seed in any::<u64>(), beta in 0.0f64..3.0) {
        let (names, forest) = forest_from_seed(seed);
        let mut rng = seeded_rng(seed);
        let raw: Vec<f64> = (0..names.len()).map(|_| rng.random_range(1e-6..1.0)).collect();
        let z: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / z).collect();
        let q = hierarchical_adjust(&p, &forest, beta).unwrap();
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (a, b) in q.iter().zip(common::adjust(&names, &p, beta)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let lists: Vec<Vec<usize>> = forest.ancestor_lists().iter().cloned().collect();
        prop_assert_eq!(adjust_with(&p, &lists, beta).unwrap(), q);
        let identity = hierarchical_adjust(&p, &forest, 0.0).unwrap();
        for (a, b) in identity.iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn window_is_idempotent_and_keeps_the_mention(seed in any::<u64>(), c in 0usize..12) {
        let (_, forest) = forest_from_seed(seed);
        let corpus = random_corpus(seed, &forest, 20);
        let w = corpus.window(c);
        prop_assert_eq!(w.window(c), w.clone());
        for (a, b) in corpus.iter().zip(w.iter()) {
            prop_assert_eq!(a.mention_tokens(), b.mention_tokens());
            prop_assert!(b.start <= c && b.len() - b.end <= c);
        }
    }

    #[test]
    fn filtering_is_idempotent(seed in any::<u64>()) {
        let (_, forest) = forest_from_seed(seed);
        let corpus = random_corpus(seed, &forest, 40);
        if let Ok(f) = corpus.build_filtered(&forest) {
            prop_assert!(f.iter().all(|m| m.is_single_path(&forest) && m.terminals.len() == 1));
            prop_assert_eq!(f.build_filtered(&forest).unwrap(), f.clone());
            let stats = corpus.stats(&forest).unwrap();
            prop_assert_eq!(stats.filtered, f.len());
        }
    }

    #[test]
    fn corpus_text_round_trips(seed in any::<u64>()) {
        let (_, forest) = forest_from_seed(seed);
        let corpus = random_corpus(seed, &forest, 15);
        let back = Corpus::parse(&corpus.to_text(&forest), &forest, "p").unwrap();
        prop_assert_eq!(back.mentions, corpus.mentions);
    }

    #[test]
    fn dev_split_partitions(seed in any::<u64>(), frac in 0.05f64..0.95) {
        let (_, forest) = forest_from_seed(seed);
        let corpus = random_corpus(seed, &forest, 30);
        let (dev, rest) = corpus.split_dev(frac, seed).unwrap();
        prop_assert_eq!(dev.len(), (frac * 30.0 + 0.5).floor() as usize);
        prop_assert_eq!(dev.len() + rest.len(), 30);
        // Order is preserved on both sides, so merging by position recovers the corpus.
        let mut merged = dev.mentions.clone();
        merged.extend(rest.mentions.clone());
        let key = |m: &Mention| corpus.mentions.iter().position(|o| o == m).unwrap();
        merged.sort_by_key(key);
        prop_assert_eq!(merged, corpus.mentions.clone());
        prop_assert_eq!(corpus.split_dev(frac, seed).unwrap(), (dev, rest));
    }

    #[test]
    fn metrics_match_oracle(seed in any::<u64>(), n in 1usize..40) {
        let (_, forest) = forest_from_seed(seed);
        let mut rng = seeded_rng(seed);
        let mut pairs = Vec::new();
        let mut sets = Vec::new();
        for _ in 0..n {
            let gold = random_subset(&mut rng, forest.len(), 5);
            let pred = TypeId(rng.random_range(0..forest.len()));
            let pair = EvalPair::from_prediction(&gold, pred, &forest).unwrap();
            sets.push((name_set(&forest, &gold), name_set(&forest, &forest.expand_to_path(pred))));
            pairs.push(pair);
        }
        let m = Metrics::from_pairs(&pairs).unwrap();
        let got = [m.strict, m.macro_p, m.macro_r, m.macro_f1, m.micro_p, m.micro_r, m.micro_f1];
        prop_assert_eq!(got, common::metrics(&sets));
        prop_assert!(got.iter().all(|v| (0.0..=1.0).contains(v)));
        if m.strict == 1.0 {
            prop_assert!(m.macro_f1 == 1.0 && m.micro_f1 == 1.0);
        }
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rng);
        let s = Metrics::from_pairs(&shuffled).unwrap();
        prop_assert_eq!(s.strict, m.strict);
        prop_assert!((s.macro_f1 - m.macro_f1).abs() < 1e-12);
        prop_assert_eq!(s.micro_f1, m.micro_f1);
    }

    #[test]
    fn macro_equals_micro_on_singletons(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = seeded_rng(seed);
        let pairs: Vec<EvalPair> = (0..n)
            .map(|_| EvalPair::new(vec![TypeId(rng.random_range(0..4))], vec![TypeId(rng.random_range(0..4))]).unwrap())
            .collect();
        let m = Metrics::from_pairs(&pairs).unwrap();
        prop_assert!((m.macro_f1 - m.micro_f1).abs() < 1e-12);
        prop_assert!((m.strict - m.micro_f1).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), dw in 1usize..6, dp in 1usize..4, ds in 1usize..6, c in 0usize..4) {
        let forest = TypeForest::parse(["/a", "/a/b", "/c", "/c/d/e"]).unwrap();
        let cfg = ModelConfig {
            word_dim: dw,
            position_dim: dp,
            hidden: ds,
            window: c,
            num_types: forest.len(),
            input_keep: 0.7,
            output_keep: 0.9,
            mention_dropout: seed % 2 == 0,
            mention_positions: seed % 3 == 0,
        };
        let model = Nfetc::new(cfg, &mut seeded_rng(seed)).unwrap();
        let ck = Checkpoint::new(model, &forest).unwrap();
        let text = ck.to_text();
        let back = Checkpoint::parse_text(&text).unwrap();
        prop_assert_eq!(back.to_text(), text);
        for ((_, a), (_, b)) in ck.model.params().iter().zip(back.model.params().iter()) {
            let bits = |t: &nfetc::Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.value), bits(&b.value));
        }
    }

    #[test]
    fn config_text_round_trips(lr in 1e-6f64..1.0, ds in 1usize..500, beta in 0.0f64..2.0, seeds in prop::collection::vec(any::<u64>(), 0..6)) {
        let mut c = Config::for_profile(Profile::Ontonotes);
        c.hp.lr = lr;
        c.hp.hidden = ds;
        c.hp.beta = beta;
        c.seeds = seeds;
        prop_assert_eq!(Config::parse_text(&c.to_text(), "c").unwrap(), c);
    }
}

#[test]
fn inference_is_deterministic_and_normalised() {
    let toy = nfetc::gradcheck::Toy::new(1).unwrap();
    for m in &toy.mentions {
        let a = toy.model.probabilities(m, &toy.embeddings).unwrap();
        let b = toy.model.probabilities(m, &toy.embeddings).unwrap();
        assert_eq!(a, b);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let trace = toy.model.trace(m, &toy.embeddings).unwrap();
        assert!((trace.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(trace.r.len(), 2 * 5 + 6);
    }
}
