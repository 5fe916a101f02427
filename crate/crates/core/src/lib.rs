//! Fine-grained entity typing.
//!
//! A mention in context is encoded by an attentive BiLSTM over the context
//! plus two mention encoders, then classified into one type of a type
//! forest. Training tolerates two kinds of distant-supervision noise:
//! candidate sets spanning several type-paths (handled by training on the
//! most probable candidate) and labels that are too specific (handled by
//! letting ancestors share probability mass in the loss).
//!
//! The crate carries its own small tensor and reverse-mode differentiation
//! layer; everything runs on `f64` and a seeded ChaCha generator, so a run
//! is reproducible bit for bit.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod hierarchy;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params;
pub mod tape;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use checkpoint::Checkpoint;
pub use config::{Config, Profile};
pub use corpus::{Corpus, CorpusStats, Mention};
pub use embedding::{PositionTable, WordEmbeddings};
pub use error::{Error, Result};
pub use evaluation::{evaluate, EvalPair, Metrics, Prf};
pub use hierarchy::{RefinementMap, TypeForest, TypeId};
pub use loss::{LossConfig, LossMode};
pub use model::{ForwardTrace, Mode, ModelConfig, Nfetc};
pub use optim::{seeded_rng, AdamState, SeededRng};
pub use params::{Gradients, ParamId, ParamSet};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
pub use training::{select_variant, train, Aggregate, Experiment, HyperParams, RunResult, Variant};
