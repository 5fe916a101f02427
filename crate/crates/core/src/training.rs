//! Mini-batch Adam training with early stopping, the four model variants,
//! and multi-seed aggregation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::WordEmbeddings;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Metrics};
use crate::hierarchy::TypeForest;
use crate::loss::{mention_loss, LossConfig, LossMode};
use crate::model::{Mode, ModelConfig, Nfetc};
use crate::optim::{seeded_stream, AdamState};
use crate::params::Gradients;

/// Random streams derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lr: f64,
    /// `d_p`.
    pub position_dim: usize,
    /// `d_s`.
    pub hidden: usize,
    /// `p_i`.
    pub input_keep: f64,
    /// `p_o`.
    pub output_keep: f64,
    /// `λ`.
    pub l2: f64,
    /// `β`.
    pub beta: f64,
    /// `C`.
    pub window: usize,
    pub batch: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub mention_dropout: bool,
    pub mention_positions: bool,
}

impl HyperParams {
    pub fn figer() -> Self {
        HyperParams {
            lr: 0.0002,
            position_dim: 85,
            hidden: 180,
            input_keep: 0.7,
            output_keep: 0.9,
            l2: 0.0,
            beta: 0.4,
            window: 10,
            batch: 512,
            epochs: 50,
            patience: 5,
            seed: 0,
            mention_dropout: true,
            mention_positions: false,
        }
    }

    pub fn ontonotes() -> Self {
        HyperParams {
            position_dim: 20,
            hidden: 440,
            input_keep: 0.5,
            output_keep: 0.5,
            l2: 0.0001,
            beta: 0.3,
            ..Self::figer()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        for (k, v) in [("dp", self.position_dim), ("ds", self.hidden), ("batch", self.batch)] {
            if v == 0 {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        for (k, p) in [("pi", self.input_keep), ("po", self.output_keep)] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!("{k} must be in (0, 1], got {p}")));
            }
        }
        if !(self.l2 >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::Config("lambda and beta must be >= 0".into()));
        }
        Ok(())
    }

    pub fn model_config(&self, word_dim: usize, num_types: usize) -> ModelConfig {
        ModelConfig {
            word_dim,
            position_dim: self.position_dim,
            hidden: self.hidden,
            window: self.window,
            num_types,
            input_keep: self.input_keep,
            output_keep: self.output_keep,
            mention_dropout: self.mention_dropout,
            mention_positions: self.mention_positions,
        }
    }
}

/// The four trained configurations: filtered or raw training data, with or
/// without hierarchical normalisation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Filtered,
    FilteredHier,
    Raw,
    RawHier,
}

pub const VARIANT_NAMES: [&str; 4] = ["NFETC(f)", "NFETC-hier(f)", "NFETC(r)", "NFETC-hier(r)"];

/// Which training set a variant consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusChoice {
    Filtered,
    Raw,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Filtered,
        Variant::FilteredHier,
        Variant::Raw,
        Variant::RawHier,
    ];

    pub fn name(self) -> &'static str {
        VARIANT_NAMES[self as usize]
    }

    pub fn corpus(self) -> CorpusChoice {
        match self {
            Variant::Filtered | Variant::FilteredHier => CorpusChoice::Filtered,
            Variant::Raw | Variant::RawHier => CorpusChoice::Raw,
        }
    }

    pub fn hierarchical(self) -> bool {
        matches!(self, Variant::FilteredHier | Variant::RawHier)
    }

    pub fn loss_config(self, hp: &HyperParams) -> LossConfig {
        let mode = match self.corpus() {
            CorpusChoice::Filtered => LossMode::Standard,
            CorpusChoice::Raw => LossMode::Variant,
        };
        LossConfig::new(mode, self.hierarchical(), hp.l2, hp.beta)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        select_variant(name)
    }
}

pub fn select_variant(name: &str) -> Result<Variant> {
    VARIANT_NAMES
        .iter()
        .position(|v| *v == name.trim())
        .map(|i| Variant::ALL[i])
        .ok_or_else(|| Error::UnknownVariant {
            name: name.to_string(),
            valid: VARIANT_NAMES.join(", "),
        })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev: Metrics,
}

impl EpochLog {
    /// `epoch, train_loss, dev_strict, dev_macro, dev_micro`
    pub fn to_line(&self) -> String {
        format!(
            "{}, {:.6}, {:.6}, {:.6}, {:.6}",
            self.epoch, self.train_loss, self.dev.strict, self.dev.macro_f1, self.dev.micro_f1
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters are kept.
    pub best_epoch: usize,
    pub best_dev: Metrics,
    pub model: Nfetc,
}

impl RunResult {
    pub fn log_text(&self) -> String {
        let mut out = String::from("epoch, train_loss, dev_strict, dev_macro, dev_micro\n");
        for e in &self.epochs {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }
}

/// Trains a fresh model on `train`, keeping the parameters with the best
/// dev strict accuracy. Both corpora are windowed to `hp.window` first.
pub fn train(
    train: &Corpus,
    dev: &Corpus,
    embeddings: &WordEmbeddings,
    forest: &TypeForest,
    hp: &HyperParams,
    loss: &LossConfig,
) -> Result<RunResult> {
    train_with_observer(train, dev, embeddings, forest, hp, loss, |_| {})
}

/// [`train`], calling `observer` after every epoch.
pub fn train_with_observer(
    train: &Corpus,
    dev: &Corpus,
    embeddings: &WordEmbeddings,
    forest: &TypeForest,
    hp: &HyperParams,
    loss: &LossConfig,
    mut observer: impl FnMut(&EpochLog),
) -> Result<RunResult> {
    hp.validate()?;
    loss.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    if dev.is_empty() {
        return Err(Error::Empty("dev corpus"));
    }
    let train = train.window(hp.window);
    let dev = dev.window(hp.window);
    if train.iter().any(|m| m.terminals.is_empty()) {
        return Err(Error::InvalidArgument("training mentions need labels".into()));
    }

    let ancestors = forest.ancestor_lists();
    let adjust = loss.inference_adjustment(&ancestors);
    let config = hp.model_config(embeddings.dim(), forest.len());
    let mut model = Nfetc::new(config, &mut seeded_stream(hp.seed, STREAM_INIT))?;
    let mut adam = AdamState::new(model.params());
    let mut shuffle_rng = seeded_stream(hp.seed, STREAM_SHUFFLE);
    let mut dropout_rng = seeded_stream(hp.seed, STREAM_DROPOUT);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut logs = Vec::new();
    let mut best: Option<(usize, Metrics, Nfetc)> = None;
    let mut stale = 0;

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(hp.batch).enumerate() {
            let mut grads = Gradients::zeros_like(model.params());
            let scale = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for &i in chunk {
                let mention = &train.mentions[i];
                let mut tape = model.tape();
                let vars = model.forward(&mut tape, mention, embeddings, &mut Mode::Train(&mut dropout_rng))?;
                let l = mention_loss(&mut tape, vars.probs, &mention.terminals, loss, &ancestors)?;
                batch_loss += tape.value(l).data()[0] * scale;
                tape.backward_into(l, scale, &mut grads).map_err(|e| match e {
                    Error::NonFinite { .. } => Error::Diverged {
                        epoch,
                        batch: b + 1,
                        loss: f64::NAN,
                    },
                    e => e,
                })?;
            }
            if loss.l2 > 0.0 {
                batch_loss += loss.l2 * model.params().l2_norm_sq();
                grads.add_l2(model.params(), loss.l2);
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b + 1,
                    loss: batch_loss,
                });
            }
            adam.step(model.params_mut(), &grads, hp.lr)?;
            loss_sum += batch_loss;
            batches += 1;
        }
        let dev_metrics = evaluate(&model, &dev, embeddings, forest, adjust)?;
        let log = EpochLog {
            epoch,
            train_loss: loss_sum / batches as f64,
            dev: dev_metrics.clone(),
        };
        observer(&log);
        logs.push(log);
        let improved = best.as_ref().is_none_or(|(_, m, _)| dev_metrics.strict > m.strict);
        if improved {
            best = Some((epoch, dev_metrics, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= hp.patience {
                break;
            }
        }
    }
    let (best_epoch, best_dev, model) = best.ok_or(Error::Config("epochs must be positive".into()))?;
    Ok(RunResult {
        epochs: logs,
        best_epoch,
        best_dev,
        model,
    })
}

/// Mean and sample standard deviation of every metric over several runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: Vec<Metrics>,
    pub mean: Metrics,
    pub std: Metrics,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Aggregate {
    pub fn from_runs(runs: Vec<Metrics>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Empty("run list"));
        }
        let field = |f: fn(&Metrics) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
        let pick = |which: usize| {
            let g = |f: fn(&Metrics) -> f64| {
                let (m, s) = field(f);
                if which == 0 {
                    m
                } else {
                    s
                }
            };
            Metrics {
                mentions: runs[0].mentions,
                strict: g(|m| m.strict),
                macro_p: g(|m| m.macro_p),
                macro_r: g(|m| m.macro_r),
                macro_f1: g(|m| m.macro_f1),
                micro_p: g(|m| m.micro_p),
                micro_r: g(|m| m.micro_r),
                micro_f1: g(|m| m.micro_f1),
            }
        };
        Ok(Aggregate {
            mean: pick(0),
            std: pick(1),
            runs,
        })
    }

    /// Percentages as `mean±std`, e.g. `strict=68.9±0.6`.
    pub fn to_report(&self) -> String {
        let f = |m: f64, s: f64| format!("{:.1}±{:.1}", 100.0 * m, 100.0 * s);
        format!(
            "runs={} strict={} macro_f1={} micro_f1={}\n",
            self.runs.len(),
            f(self.mean.strict, self.std.strict),
            f(self.mean.macro_f1, self.std.macro_f1),
            f(self.mean.micro_f1, self.std.micro_f1)
        )
    }
}

/// Runs `run` once per seed and aggregates the returned metrics.
pub fn run_multi(seeds: &[u64], mut run: impl FnMut(u64) -> Result<Metrics>) -> Result<Aggregate> {
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let runs = seeds.iter().map(|&s| run(s)).collect::<Result<Vec<_>>>()?;
    Aggregate::from_runs(runs)
}

/// Everything needed to train and score one variant.
#[derive(Clone, Copy, Debug)]
pub struct Experiment<'a> {
    pub forest: &'a TypeForest,
    pub embeddings: &'a WordEmbeddings,
    /// The raw training set; filtered variants derive their subset from it.
    pub train: &'a Corpus,
    pub dev: &'a Corpus,
    pub test: &'a Corpus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRun {
    pub result: RunResult,
    pub test: Metrics,
}

impl Experiment<'_> {
    pub fn training_set(&self, variant: Variant) -> Result<Corpus> {
        match variant.corpus() {
            CorpusChoice::Raw => Ok(self.train.clone()),
            CorpusChoice::Filtered => self.train.build_filtered(self.forest),
        }
    }

    pub fn run(&self, variant: Variant, hp: &HyperParams) -> Result<ExperimentRun> {
        self.run_with_loss(variant, hp, &variant.loss_config(hp))
    }

    /// [`Experiment::run`] with an explicit loss configuration.
    pub fn run_with_loss(&self, variant: Variant, hp: &HyperParams, loss: &LossConfig) -> Result<ExperimentRun> {
        let loss = loss.clone();
        let train_set = self.training_set(variant)?;
        let result = train(&train_set, self.dev, self.embeddings, self.forest, hp, &loss)?;
        let ancestors = self.forest.ancestor_lists();
        let test = evaluate(
            &result.model,
            &self.test.window(hp.window),
            self.embeddings,
            self.forest,
            loss.inference_adjustment(&ancestors),
        )?;
        Ok(ExperimentRun { result, test })
    }

    /// Test metrics of one run per seed, aggregated.
    pub fn run_seeds(&self, variant: Variant, hp: &HyperParams, seeds: &[u64]) -> Result<Aggregate> {
        run_multi(seeds, |seed| {
            let hp = HyperParams { seed, ..hp.clone() };
            Ok(self.run(variant, &hp)?.test)
        })
    }
}
