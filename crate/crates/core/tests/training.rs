use nfetc::{synthetic, train, Error, Experiment, HyperParams, Variant};

fn overfit_experiment(c: &synthetic::SyntheticCorpus) -> Experiment<'_> {
    Experiment {
        forest: &c.forest,
        embeddings: &c.embeddings,
        train: &c.train,
        dev: &c.dev,
        test: &c.test,
    }
}

#[test]
fn five_seeds_fit_the_clean_corpus() {
    let c = synthetic::load_bundled("overfit").unwrap();
    let agg = overfit_experiment(&c)
        .run_seeds(Variant::Filtered, &synthetic::hyperparams(0), &[0, 1, 2, 3, 4])
        .unwrap();
    assert_eq!(agg.runs.len(), 5);
    assert!(agg.mean.strict >= 0.99, "{}", agg.to_report());
    assert!(agg.std.strict >= 0.0);
}

#[test]
fn repeated_seed_has_zero_spread() {
    let c = synthetic::load_bundled("overfit").unwrap();
    let hp = HyperParams {
        epochs: 3,
        ..synthetic::hyperparams(0)
    };
    let agg = overfit_experiment(&c).run_seeds(Variant::Raw, &hp, &[7, 7]).unwrap();
    assert_eq!(agg.std.strict, 0.0);
    assert_eq!(agg.std.micro_f1, 0.0);
    assert_eq!(agg.runs[0], agg.runs[1]);
}

#[test]
fn early_stopping_keeps_the_first_best_epoch() {
    let c = synthetic::load_bundled("overly_specific").unwrap();
    let hp = HyperParams {
        patience: 3,
        ..synthetic::hyperparams(1)
    };
    let loss = Variant::Filtered.loss_config(&hp);
    let train_set = c.train.build_filtered(&c.forest).unwrap();
    let run = train(&train_set, &c.dev, &c.embeddings, &c.forest, &hp, &loss).unwrap();
    let best = run.epochs.iter().map(|e| e.dev.strict).fold(f64::MIN, f64::max);
    let first_best = run.epochs.iter().find(|e| e.dev.strict == best).unwrap().epoch;
    assert_eq!(run.best_epoch, first_best);
    assert_eq!(run.best_dev.strict, best);
    if run.epochs.len() < hp.epochs {
        assert_eq!(run.epochs.len(), run.best_epoch + hp.patience);
    }
    assert_eq!(run.log_text().lines().count(), run.epochs.len() + 1);
}

#[test]
fn standard_loss_rejects_multi_path_mentions() {
    let c = synthetic::load_bundled("out_of_context").unwrap();
    let hp = synthetic::hyperparams(0);
    let loss = Variant::Filtered.loss_config(&hp);
    let err = train(&c.train, &c.dev, &c.embeddings, &c.forest, &hp, &loss).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
}

#[test]
fn invalid_hyperparameters_are_rejected() {
    let c = synthetic::load_bundled("overfit").unwrap();
    let hp = HyperParams {
        input_keep: 0.0,
        ..synthetic::hyperparams(0)
    };
    let loss = Variant::Filtered.loss_config(&hp);
    assert!(train(&c.train, &c.dev, &c.embeddings, &c.forest, &hp, &loss).is_err());
}
