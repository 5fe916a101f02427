//! Strict accuracy and loose macro/micro F1 over type sets.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::WordEmbeddings;
use crate::error::{Error, Result};
use crate::hierarchy::{TypeForest, TypeId};
use crate::model::Nfetc;
use crate::tape::AncestorLists;

/// Gold type set against the predicted type-path, both sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalPair {
    gold: Vec<TypeId>,
    predicted: Vec<TypeId>,
}

fn normalise(mut v: Vec<TypeId>) -> Vec<TypeId> {
    v.sort_unstable();
    v.dedup();
    v
}

impl EvalPair {
    pub fn new(gold: Vec<TypeId>, predicted: Vec<TypeId>) -> Result<Self> {
        if gold.is_empty() || predicted.is_empty() {
            return Err(Error::Empty("type set in evaluation pair"));
        }
        Ok(EvalPair {
            gold: normalise(gold),
            predicted: normalise(predicted),
        })
    }

    /// Pairs gold labels with the path of a single predicted type.
    pub fn from_prediction(gold: &[TypeId], predicted: TypeId, forest: &TypeForest) -> Result<Self> {
        Self::new(gold.to_vec(), forest.expand_to_path(predicted))
    }

    pub fn gold(&self) -> &[TypeId] {
        &self.gold
    }

    pub fn predicted(&self) -> &[TypeId] {
        &self.predicted
    }

    fn overlap(&self) -> usize {
        // Both sides are sorted.
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.gold.len() && j < self.predicted.len() {
            match self.gold[i].cmp(&self.predicted[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

fn non_empty(pairs: &[EvalPair]) -> Result<()> {
    if pairs.is_empty() {
        Err(Error::Empty("evaluation pairs"))
    } else {
        Ok(())
    }
}

pub fn strict_accuracy(pairs: &[EvalPair]) -> Result<f64> {
    non_empty(pairs)?;
    let hits = pairs.iter().filter(|p| p.gold == p.predicted).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Per-pair precision and recall averaged over pairs; F1 of the averages.
pub fn loose_macro(pairs: &[EvalPair]) -> Result<Prf> {
    non_empty(pairs)?;
    let (mut p, mut r) = (0.0, 0.0);
    for pair in pairs {
        let o = pair.overlap() as f64;
        p += o / pair.predicted.len() as f64;
        r += o / pair.gold.len() as f64;
    }
    let n = pairs.len() as f64;
    Ok(Prf::new(p / n, r / n))
}

/// Precision and recall over pooled counts.
pub fn loose_micro(pairs: &[EvalPair]) -> Result<Prf> {
    non_empty(pairs)?;
    let (mut o, mut np, mut ng) = (0usize, 0usize, 0usize);
    for pair in pairs {
        o += pair.overlap();
        np += pair.predicted.len();
        ng += pair.gold.len();
    }
    Ok(Prf::new(o as f64 / np as f64, o as f64 / ng as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mentions: usize,
    pub strict: f64,
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f1: f64,
    pub micro_p: f64,
    pub micro_r: f64,
    pub micro_f1: f64,
}

impl Metrics {
    pub fn from_pairs(pairs: &[EvalPair]) -> Result<Self> {
        let strict = strict_accuracy(pairs)?;
        let ma = loose_macro(pairs)?;
        let mi = loose_micro(pairs)?;
        Ok(Metrics {
            mentions: pairs.len(),
            strict,
            macro_p: ma.precision,
            macro_r: ma.recall,
            macro_f1: ma.f1,
            micro_p: mi.precision,
            micro_r: mi.recall,
            micro_f1: mi.f1,
        })
    }

    pub fn macro_prf(&self) -> Prf {
        Prf::new(self.macro_p, self.macro_r)
    }

    pub fn micro_prf(&self) -> Prf {
        Prf::new(self.micro_p, self.micro_r)
    }

    /// `strict=… macro_p=… macro_r=… macro_f1=… micro_p=… micro_r=… micro_f1=…`
    pub fn to_report(&self) -> String {
        format!(
            "strict={:.6} macro_p={:.6} macro_r={:.6} macro_f1={:.6} micro_p={:.6} micro_r={:.6} micro_f1={:.6}\n",
            self.strict, self.macro_p, self.macro_r, self.macro_f1, self.micro_p, self.micro_r, self.micro_f1
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Predicted terminal type for every mention, inference mode.
pub fn predict_corpus(
    model: &Nfetc,
    corpus: &Corpus,
    embeddings: &WordEmbeddings,
    adjust: Option<(&AncestorLists, f64)>,
) -> Result<Vec<TypeId>> {
    corpus
        .iter()
        .map(|m| model.predict(m, embeddings, adjust))
        .collect()
}

/// Runs the model over a labelled corpus and scores the predicted paths
/// against each mention's full label set.
pub fn evaluate(
    model: &Nfetc,
    corpus: &Corpus,
    embeddings: &WordEmbeddings,
    forest: &TypeForest,
    adjust: Option<(&AncestorLists, f64)>,
) -> Result<Metrics> {
    let predictions = predict_corpus(model, corpus, embeddings, adjust)?;
    let pairs = corpus
        .iter()
        .zip(predictions)
        .map(|(m, y)| EvalPair::from_prediction(&m.labels, y, forest))
        .collect::<Result<Vec<_>>>()?;
    Metrics::from_pairs(&pairs)
}
