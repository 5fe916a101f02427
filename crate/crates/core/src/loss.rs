//! Training objectives: cross-entropy, the argmax-selected variant for
//! multi-path candidate sets, hierarchical normalisation and L2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{TypeForest, TypeId};
use crate::params::ParamSet;
use crate::tape::{AncestorLists, Tape, Var};
use crate::tensor::argmax;

/// Lower bound applied inside every `ln`.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// Needs exactly one terminal type per mention.
    Standard,
    /// Trains on the most probable candidate terminal, chosen afresh each step.
    Variant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// `λ`, weight of `‖Θ‖²` over trainable parameters.
    pub l2: f64,
    /// `β`, share of ancestor mass added to each type.
    pub beta: f64,
    pub mode: LossMode,
    pub hierarchical: bool,
    /// Variant selection looks at the adjusted distribution (`true`) or the
    /// raw softmax output.
    pub select_on_adjusted: bool,
    /// Predict from the adjusted distribution instead of the raw one.
    pub hier_at_inference: bool,
}

impl LossConfig {
    pub fn new(mode: LossMode, hierarchical: bool, l2: f64, beta: f64) -> Self {
        LossConfig {
            l2,
            beta,
            mode,
            hierarchical,
            select_on_adjusted: true,
            hier_at_inference: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0) || !self.l2.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.l2)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }

    /// The `(ancestors, β)` pair to pass to prediction, if any.
    pub fn inference_adjustment<'a>(
        &self,
        ancestors: &'a AncestorLists,
    ) -> Option<(&'a AncestorLists, f64)> {
        (self.hierarchical && self.hier_at_inference).then_some((ancestors, self.beta))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")))
    }
}

/// `q(y) = p(y) + β·Σ_{t ∈ Γ(y)} p(t)`, renormalised to sum to one.
pub fn adjust_with(p: &[f64], ancestors: &[Vec<usize>], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    if p.len() != ancestors.len() {
        return Err(Error::shape(
            "hierarchical_adjust",
            format!("{} probabilities for {} types", p.len(), ancestors.len()),
        ));
    }
    let q: Vec<f64> = ancestors
        .iter()
        .enumerate()
        .map(|(y, anc)| p[y] + beta * anc.iter().map(|&t| p[t]).sum::<f64>())
        .collect();
    let total: f64 = q.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("distribution has no mass".into()));
    }
    Ok(q.into_iter().map(|x| x / total).collect())
}

pub fn hierarchical_adjust(p: &[f64], forest: &TypeForest, beta: f64) -> Result<Vec<f64>> {
    adjust_with(p, &forest.ancestor_lists(), beta)
}

fn l2_value(params: &ParamSet, lambda: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else {
        lambda * params.l2_norm_sq()
    }
}

fn neg_log(p: f64) -> f64 {
    -p.max(PROB_FLOOR).ln()
}

/// `-ln p*(y) + λ‖Θ‖²` for a single gold terminal.
pub fn cross_entropy(p_star: &[f64], gold: &[TypeId], params: &ParamSet, lambda: f64) -> Result<f64> {
    let [y] = gold else {
        return Err(Error::InvalidArgument(format!(
            "standard cross-entropy needs one gold type, got {}",
            gold.len()
        )));
    };
    let p = *p_star
        .get(y.0)
        .ok_or_else(|| Error::shape("cross_entropy", "gold type outside distribution"))?;
    Ok(neg_log(p) + l2_value(params, lambda))
}

/// The candidate with the highest probability; ties go to the lowest index.
pub fn select_target(p: &[f64], candidates: &[TypeId]) -> Result<TypeId> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate type set"));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    if sorted.last().is_some_and(|t| t.0 >= p.len()) {
        return Err(Error::shape("select_target", "candidate outside distribution"));
    }
    let values: Vec<f64> = sorted.iter().map(|t| p[t.0]).collect();
    Ok(sorted[argmax(&values).expect("non-empty")])
}

/// `-ln max_{y ∈ 𝒴ᵗ} p*(y) + λ‖Θ‖²`.
pub fn variant_cross_entropy(
    p_star: &[f64],
    terminals: &[TypeId],
    params: &ParamSet,
    lambda: f64,
) -> Result<f64> {
    let y = select_target(p_star, terminals)?;
    Ok(neg_log(p_star[y.0]) + l2_value(params, lambda))
}

/// Per-mention loss recorded on `tape`, without the L2 term.
pub fn mention_loss(
    tape: &mut Tape<'_>,
    probs: Var,
    terminals: &[TypeId],
    config: &LossConfig,
    ancestors: &AncestorLists,
) -> Result<Var> {
    let p_star = if config.hierarchical {
        let q = tape.hier_mix(probs, ancestors, config.beta)?;
        tape.normalize(q)?
    } else {
        probs
    };
    let target = match config.mode {
        LossMode::Standard => match terminals {
            [y] => *y,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "standard loss needs a single type-path, got {} terminals",
                    terminals.len()
                )))
            }
        },
        LossMode::Variant => {
            let basis = if config.select_on_adjusted { p_star } else { probs };
            select_target(tape.value(basis).data(), terminals)?
        }
    };
    let picked = tape.pick(p_star, target.0)?;
    let ln = tape.ln_floor(picked, PROB_FLOOR);
    Ok(tape.scale(ln, -1.0))
}

/// `λ‖Θ‖²` over every trainable parameter, recorded on `tape`.
pub fn l2_penalty(tape: &mut Tape<'_>, params: &ParamSet, lambda: f64) -> Result<Var> {
    let squares: Vec<Var> = params
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, _)| id)
        .collect::<Vec<_>>()
        .into_iter()
        .map(|id| {
            let v = tape.param(id);
            tape.sum_squares(v)
        })
        .collect();
    if squares.is_empty() {
        return Ok(tape.constant(crate::Tensor::scalar(0.0)));
    }
    let total = tape.add_n(&squares)?;
    Ok(tape.scale(total, lambda))
}

/// Mean of the per-mention losses plus one `λ‖Θ‖²` term.
pub fn batch_loss(
    tape: &mut Tape<'_>,
    probs: &[Var],
    terminals: &[&[TypeId]],
    config: &LossConfig,
    ancestors: &AncestorLists,
    params: &ParamSet,
) -> Result<Var> {
    if probs.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if probs.len() != terminals.len() {
        return Err(Error::shape("batch_loss", "one label set per mention required"));
    }
    let losses = probs
        .iter()
        .zip(terminals)
        .map(|(&p, t)| mention_loss(tape, p, t, config, ancestors))
        .collect::<Result<Vec<_>>>()?;
    let total = tape.add_n(&losses)?;
    let mean = tape.scale(total, 1.0 / probs.len() as f64);
    if config.l2 == 0.0 {
        return Ok(mean);
    }
    let l2 = l2_penalty(tape, params, config.l2)?;
    tape.add(mean, l2)
}
