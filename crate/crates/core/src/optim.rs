//! Adam, inverted dropout and the seeded random source.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamSet};
use crate::tensor::Tensor;

/// The crate-wide random generator: ChaCha with 8 rounds, seeded from a
/// `u64`. Streams are portable across platforms, so a seed pins a run.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An independent stream of the generator for `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Adam with bias-corrected moments.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        Self::with_constants(params, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON)
    }

    pub fn with_constants(params: &ParamSet, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros = || params.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
        AdamState {
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update of every trainable parameter. Frozen parameters are
    /// skipped entirely.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
        }
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::shape("adam_step", "gradients do not match parameter set"));
        }
        for ((_, g), (_, p)) in grads.iter().zip(params.iter()) {
            if g.shape() != p.value.shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!("`{}`: gradient {:?} vs parameter {:?}", p.name, g.shape(), p.value.shape()),
                ));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, (param, (_, grad))) in params.params_mut().iter_mut().zip(grads.iter()).enumerate() {
            if !param.trainable {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &g)) in param.value.data_mut().iter_mut().zip(grad.data()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Inverted-dropout mask: each entry is `1/keep_prob` with probability
/// `keep_prob`, else 0. `keep_prob = 1` yields all ones without drawing.
pub fn dropout_mask(shape: &[usize], keep_prob: f64, rng: &mut SeededRng) -> Result<Tensor> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep probability must be in (0, 1], got {keep_prob}"
        )));
    }
    if keep_prob == 1.0 {
        return Ok(Tensor::filled(shape, 1.0));
    }
    let scale = 1.0 / keep_prob;
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| if rng.random::<f64>() < keep_prob { scale } else { 0.0 })
        .collect();
    Tensor::new(shape.to_vec(), data)
}
