//! Central finite-difference check of the analytic gradients.

use crate::corpus::Mention;
use crate::embedding::WordEmbeddings;
use crate::error::Result;
use crate::hierarchy::TypeForest;
use crate::loss::{batch_loss, LossConfig, LossMode};
use crate::model::{Mode, ModelConfig, Nfetc};
use crate::optim::{seeded_rng, seeded_stream};
use crate::params::Gradients;
use crate::tape::AncestorLists;

/// Worst disagreement found for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamReport {
    pub name: String,
    pub values: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub params: Vec<ParamReport>,
}

impl GradCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn values_checked(&self) -> usize {
        self.params.iter().map(|p| p.values).sum()
    }
}

/// `|a − n| / max(|a|, |n|, floor)`; the floor keeps gradients that are
/// zero up to rounding from producing meaningless ratios.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Denominator floor used by [`check_gradients`].
pub const REL_FLOOR: f64 = 1e-8;

/// One fixed problem: a model, its inputs and the loss being checked.
pub struct Problem<'a> {
    pub forest: &'a TypeForest,
    pub embeddings: &'a WordEmbeddings,
    pub mentions: &'a [Mention],
    pub loss: &'a LossConfig,
    /// Seed for a dropout mask that is redrawn identically on every
    /// evaluation; `None` runs without dropout.
    pub dropout_seed: Option<u64>,
}

impl Problem<'_> {
    fn record(&self, model: &Nfetc, ancestors: &AncestorLists) -> Result<(f64, Option<Gradients>)> {
        self.evaluate(model, ancestors, false)
    }

    fn evaluate(&self, model: &Nfetc, ancestors: &AncestorLists, grads: bool) -> Result<(f64, Option<Gradients>)> {
        let mut tape = model.tape();
        let mut rng = self.dropout_seed.map(|s| seeded_stream(s, 2));
        let mut probs = Vec::with_capacity(self.mentions.len());
        for m in self.mentions {
            let mut mode = match rng.as_mut() {
                Some(r) => Mode::Train(r),
                None => Mode::Infer,
            };
            probs.push(model.forward(&mut tape, m, self.embeddings, &mut mode)?.probs);
        }
        let terminals: Vec<&[_]> = self.mentions.iter().map(|m| m.terminals.as_slice()).collect();
        let loss = batch_loss(&mut tape, &probs, &terminals, self.loss, ancestors, model.params())?;
        let value = tape.value(loss).data()[0];
        let g = if grads { Some(tape.backward(loss)?) } else { None };
        Ok((value, g))
    }

    /// Loss value for `model`.
    pub fn loss_value(&self, model: &Nfetc) -> Result<f64> {
        Ok(self.record(model, &self.forest.ancestor_lists())?.0)
    }
}

/// Compares every trainable value's analytic gradient against
/// `(L(θ+h) − L(θ−h)) / 2h`.
pub fn check_gradients(model: &Nfetc, problem: &Problem<'_>, step: f64) -> Result<GradCheck> {
    let ancestors = problem.forest.ancestor_lists();
    let (_, grads) = problem.evaluate(model, &ancestors, true)?;
    let grads = grads.expect("gradients requested");
    let mut probe = model.clone();
    let mut reports = Vec::new();
    for (id, p) in model.params().iter() {
        if !p.trainable {
            continue;
        }
        let analytic = grads.get(id).data().to_vec();
        let mut report = ParamReport {
            name: p.name.clone(),
            values: analytic.len(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
        };
        for (i, &a) in analytic.iter().enumerate() {
            let original = p.value.data()[i];
            probe.params_mut().value_mut(id)?.data_mut()[i] = original + step;
            let (up, _) = problem.record(&probe, &ancestors)?;
            probe.params_mut().value_mut(id)?.data_mut()[i] = original - step;
            let (down, _) = problem.record(&probe, &ancestors)?;
            probe.params_mut().value_mut(id)?.data_mut()[i] = original;
            let numeric = (up - down) / (2.0 * step);
            report.max_rel_error = report.max_rel_error.max(relative_error(a, numeric, REL_FLOOR));
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
        }
        reports.push(report);
    }
    Ok(GradCheck { params: reports })
}

/// A small fixed instance: `d_w = 6`, `d_p = 3`, `d_s = 5`, four types in
/// a depth-3 forest and five-token sentences, one of them labelled with
/// two type-paths.
pub struct Toy {
    pub model: Nfetc,
    pub forest: TypeForest,
    pub embeddings: WordEmbeddings,
    pub mentions: Vec<Mention>,
}

impl Toy {
    pub fn new(seed: u64) -> Result<Self> {
        let forest = TypeForest::parse(["/person", "/person/artist", "/person/artist/actor", "/location"])?;
        let mut rng = seeded_rng(seed);
        let words = ["the", "actor", "Kim", "won", "in", "Seoul", "again"];
        let embeddings = WordEmbeddings::from_vectors(
            words
                .iter()
                .map(|w| {
                    let v = (0..6).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
                    (w.to_string(), v)
                })
                .collect(),
        )?;
        let id = |n: &str| forest.id(n);
        let sentence = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        let mentions = vec![
            Mention::new(sentence("the actor Kim won again"), 2, 3, vec![id("/person")?, id("/person/artist/actor")?], &forest)?,
            Mention::new(sentence("Kim won in Seoul again"), 3, 4, vec![id("/location")?], &forest)?,
            // Two type-paths: exercises candidate selection.
            Mention::new(sentence("in Seoul the actor won"), 1, 2, vec![id("/person/artist")?, id("/location")?], &forest)?,
            // Sentence-initial mention with an out-of-vocabulary token.
            Mention::new(sentence("Lee won the actor again"), 0, 1, vec![id("/person/artist")?], &forest)?,
        ];
        let config = ModelConfig {
            word_dim: 6,
            position_dim: 3,
            hidden: 5,
            window: 10,
            num_types: forest.len(),
            input_keep: 0.8,
            output_keep: 0.7,
            mention_dropout: true,
            mention_positions: false,
        };
        let model = Nfetc::new(config, &mut seeded_stream(seed, 0))?;
        Ok(Toy {
            model,
            forest,
            embeddings,
            mentions,
        })
    }

    /// The raw-data hierarchical loss: candidate selection plus
    /// hierarchical normalisation and an L2 term.
    pub fn hier_raw_loss() -> LossConfig {
        LossConfig::new(LossMode::Variant, true, 1e-3, 0.4)
    }

    pub fn problem<'a>(&'a self, loss: &'a LossConfig, dropout_seed: Option<u64>) -> Problem<'a> {
        Problem {
            forest: &self.forest,
            embeddings: &self.embeddings,
            mentions: &self.mentions,
            loss,
            dropout_seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0, 1e-8), 0.0);
        assert!((relative_error(2.0, 1.0, 1e-8) - 0.5).abs() < 1e-15);
        assert!(relative_error(1e-12, 0.0, 1e-8) < 1e-3);
    }

    #[test]
    fn toy_gradients_match() {
        let toy = Toy::new(3).unwrap();
        let loss = Toy::hier_raw_loss();
        for dropout in [None, Some(9)] {
            let report = check_gradients(&toy.model, &toy.problem(&loss, dropout), 1e-5).unwrap();
            assert_eq!(report.params.len(), 10);
            assert!(report.max_rel_error() < 1e-4, "{:?}", report.params);
        }
    }

    #[test]
    fn perturbation_changes_loss() {
        let toy = Toy::new(3).unwrap();
        let loss = Toy::hier_raw_loss();
        let problem = toy.problem(&loss, None);
        let base = problem.loss_value(&toy.model).unwrap();
        let mut m = toy.model.clone();
        let id = m.params().id("classifier.b").unwrap();
        m.params_mut().value_mut(id).unwrap().data_mut()[0] += 0.1;
        assert_ne!(problem.loss_value(&m).unwrap(), base);
    }
}
