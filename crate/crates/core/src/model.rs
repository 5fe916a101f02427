//! The entity-typing network.
//!
//! Per mention:
//!
//! 1. every context token becomes `[word vector; position vector]`;
//! 2. a bidirectional LSTM reads the context and the two directions'
//!    outputs are summed element-wise into `H` (`d_s × T`);
//! 3. word-level attention pools `H` into `r_c`: `α = softmax(wᵀ tanh H)`,
//!    `r_c = H α`;
//! 4. the mention is encoded twice: `r_a` averages its word vectors, and a
//!    left-to-right LSTM over the mention widened by one token on each side
//!    yields `r_l` (its last output);
//! 5. `R = [r_c; r_a; r_l]` feeds a softmax classifier over all K types.
//!
//! Dropout wraps every LSTM's inputs and outputs in training mode only.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::Mention;
use crate::embedding::{PositionTable, WordEmbeddings};
use crate::error::{Error, Result};
use crate::hierarchy::TypeId;
use crate::optim::{dropout_mask, SeededRng};
use crate::params::{ParamId, ParamSet};
use crate::tape::{AncestorLists, Tape, Var};
use crate::tensor::{argmax, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// `d_w`, fixed by the embedding file.
    pub word_dim: usize,
    /// `d_p`.
    pub position_dim: usize,
    /// `d_s`, shared by the context and mention LSTMs.
    pub hidden: usize,
    /// Context window `C`; also sizes the position table.
    pub window: usize,
    pub num_types: usize,
    /// Input keep probability `p_i`.
    pub input_keep: f64,
    /// Output keep probability `p_o`.
    pub output_keep: f64,
    /// Apply dropout to the mention LSTM as well as the context BiLSTM.
    pub mention_dropout: bool,
    /// Feed position vectors to the mention LSTM too.
    pub mention_positions: bool,
}

impl ModelConfig {
    pub fn context_input_dim(&self) -> usize {
        self.word_dim + self.position_dim
    }

    pub fn mention_input_dim(&self) -> usize {
        if self.mention_positions {
            self.word_dim + self.position_dim
        } else {
            self.word_dim
        }
    }

    /// Dimension of `R`: `2·d_s + d_w`.
    pub fn feature_dim(&self) -> usize {
        2 * self.hidden + self.word_dim
    }

    pub fn position_table(&self) -> PositionTable {
        PositionTable::new(self.window, self.position_dim)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_dim", self.word_dim),
            ("position_dim", self.position_dim),
            ("hidden", self.hidden),
            ("num_types", self.num_types),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        for (name, p) in [("input_keep", self.input_keep), ("output_keep", self.output_keep)] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must be in (0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Parameter handles for one LSTM. `kernel` is `4·d_s × (d_in + d_s)`
/// acting on `[x; h]`, gates ordered input, forget, candidate, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub kernel: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamIds {
    pub position: ParamId,
    pub context_forward: LstmParams,
    pub context_backward: LstmParams,
    pub attention: ParamId,
    pub mention: LstmParams,
    pub type_embeddings: ParamId,
    pub type_bias: ParamId,
}

pub const POSITION_TABLE: &str = "position.table";
pub const CONTEXT_FORWARD: &str = "context.forward";
pub const CONTEXT_BACKWARD: &str = "context.backward";
pub const ATTENTION: &str = "attention.w";
pub const MENTION_LSTM: &str = "mention";
pub const TYPE_EMBEDDINGS: &str = "classifier.W";
pub const TYPE_BIAS: &str = "classifier.b";

/// Whether a forward pass samples dropout masks.
pub enum Mode<'r> {
    Train(&'r mut SeededRng),
    Infer,
}

/// Handles to the recorded intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub outputs: Vec<Var>,
    pub h: Var,
    pub alpha: Var,
    pub r_c: Var,
    pub r_a: Var,
    pub r_l: Var,
    pub r: Var,
    pub probs: Var,
}

/// Concrete values of one inference pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// `d_s × T`.
    pub h: Tensor,
    pub alpha: Vec<f64>,
    pub r_c: Vec<f64>,
    pub r_a: Vec<f64>,
    pub r_l: Vec<f64>,
    pub r: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nfetc {
    config: ModelConfig,
    params: ParamSet,
    ids: ParamIds,
}

fn glorot(rng: &mut SeededRng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

/// Rows of a random `n × n` orthogonal matrix (Gram-Schmidt on Gaussians).
fn orthogonal(rng: &mut SeededRng, n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for r in &rows {
            let proj: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= proj * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    rows
}

fn lstm_init(rng: &mut SeededRng, input_dim: usize, hidden: usize) -> (Tensor, Tensor) {
    let cols = input_dim + hidden;
    let input = glorot(rng, 4 * hidden, input_dim, input_dim, 4 * hidden);
    let mut kernel = vec![0.0; 4 * hidden * cols];
    for r in 0..4 * hidden {
        kernel[r * cols..r * cols + input_dim].copy_from_slice(input.row(r));
    }
    for gate in 0..4 {
        for (i, row) in orthogonal(rng, hidden).into_iter().enumerate() {
            let r = gate * hidden + i;
            kernel[r * cols + input_dim..(r + 1) * cols].copy_from_slice(&row);
        }
    }
    let mut bias = vec![0.0; 4 * hidden];
    bias[hidden..2 * hidden].fill(1.0);
    (
        Tensor::matrix(4 * hidden, cols, kernel).expect("positive dims"),
        Tensor::vector(bias),
    )
}

impl Nfetc {
    /// Fresh parameters drawn from `rng`.
    pub fn new(config: ModelConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let mut params = ParamSet::new();
        params.add(POSITION_TABLE, config.position_table().init(rng), true)?;
        for (name, input_dim) in [
            (CONTEXT_FORWARD, config.context_input_dim()),
            (CONTEXT_BACKWARD, config.context_input_dim()),
            (MENTION_LSTM, config.mention_input_dim()),
        ] {
            let (kernel, bias) = lstm_init(rng, input_dim, h);
            params.add(&format!("{name}.kernel"), kernel, true)?;
            params.add(&format!("{name}.bias"), bias, true)?;
        }
        let w = glorot(rng, h, 1, h, 1);
        params.add(ATTENTION, Tensor::vector(w.into_data()), true)?;
        let f = config.feature_dim();
        let k = config.num_types;
        params.add(TYPE_EMBEDDINGS, glorot(rng, k, f, f, k), true)?;
        params.add(TYPE_BIAS, Tensor::zeros(&[k]), true)?;
        Self::from_params(config, params)
    }

    /// Wraps existing parameters after checking every name and shape.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let expect = |name: &str, shape: &[usize]| -> Result<ParamId> {
            let id = params
                .id(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            let got = params.value(id).shape();
            if got != shape {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {got:?}, model config needs {shape:?}"
                )));
            }
            Ok(id)
        };
        let lstm = |name: &str, input_dim: usize| -> Result<LstmParams> {
            Ok(LstmParams {
                kernel: expect(&format!("{name}.kernel"), &[4 * h, input_dim + h])?,
                bias: expect(&format!("{name}.bias"), &[4 * h])?,
            })
        };
        let table = config.position_table();
        let ids = ParamIds {
            position: expect(POSITION_TABLE, &[table.rows(), config.position_dim])?,
            context_forward: lstm(CONTEXT_FORWARD, config.context_input_dim())?,
            context_backward: lstm(CONTEXT_BACKWARD, config.context_input_dim())?,
            attention: expect(ATTENTION, &[h])?,
            mention: lstm(MENTION_LSTM, config.mention_input_dim())?,
            type_embeddings: expect(TYPE_EMBEDDINGS, &[config.num_types, config.feature_dim()])?,
            type_bias: expect(TYPE_BIAS, &[config.num_types])?,
        };
        if params.len() != 10 {
            return Err(Error::Checkpoint(format!(
                "expected 10 parameters, found {}",
                params.len()
            )));
        }
        Ok(Nfetc {
            config,
            params,
            ids,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn ids(&self) -> &ParamIds {
        &self.ids
    }

    /// A tape bound to this model's parameters.
    pub fn tape(&self) -> Tape<'_> {
        Tape::with_params(&self.params)
    }

    /// Records the full forward pass for `mention` on `tape`.
    pub fn forward<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        mention: &Mention,
        embeddings: &WordEmbeddings,
        mode: &mut Mode<'_>,
    ) -> Result<ForwardVars> {
        if embeddings.dim() != self.config.word_dim {
            return Err(Error::shape(
                "forward",
                format!(
                    "embeddings have d_w = {}, model expects {}",
                    embeddings.dim(),
                    self.config.word_dim
                ),
            ));
        }
        let cfg = &self.config;
        let table = cfg.position_table();
        let position = tape.param(self.ids.position);

        let mut context_inputs = Vec::with_capacity(mention.len());
        for (i, token) in mention.tokens.iter().enumerate() {
            let word = tape.constant(Tensor::vector(embeddings.lookup(token).to_vec()));
            let row = table.bucket(i, mention.start, mention.end)?;
            let pos = tape.row(position, row)?;
            context_inputs.push(tape.concat(&[word, pos])?);
        }
        let fw = self.lstm_vars(tape, self.ids.context_forward);
        let bw = self.lstm_vars(tape, self.ids.context_backward);
        let outputs = {
            let mut dropout = dropout_for(mode, cfg.input_keep, cfg.output_keep);
            bilstm_context(tape, &context_inputs, fw, bw, dropout.as_mut())?
        };
        let w = tape.param(self.ids.attention);
        let (h, alpha, r_c) = attention(tape, &outputs, w)?;

        let mention_words: Vec<&[f64]> = mention
            .mention_tokens()
            .iter()
            .map(|t| embeddings.lookup(t))
            .collect();
        let r_a = tape.constant(Tensor::vector(mention_average(&mention_words)?));

        let mut extended = Vec::with_capacity(mention.end - mention.start + 2);
        let lo = mention.start as isize - 1;
        let hi = mention.end as isize + 1;
        for i in lo..hi {
            let word = if i < 0 || i as usize >= mention.len() {
                embeddings.zero_vector()
            } else {
                embeddings.lookup(&mention.tokens[i as usize])
            };
            let word = tape.constant(Tensor::vector(word.to_vec()));
            let input = if cfg.mention_positions {
                let d = if i < mention.start as isize {
                    -1
                } else if i >= mention.end as isize {
                    1
                } else {
                    0
                };
                let pos = tape.row(position, (d + cfg.window as isize) as usize)?;
                tape.concat(&[word, pos])?
            } else {
                word
            };
            extended.push(input);
        }
        let cell = self.lstm_vars(tape, self.ids.mention);
        let r_l = {
            let mut dropout = if cfg.mention_dropout {
                dropout_for(mode, cfg.input_keep, cfg.output_keep)
            } else {
                None
            };
            mention_lstm(tape, &extended, cell, dropout.as_mut())?
        };

        let r = tape.concat(&[r_c, r_a, r_l])?;
        let w_types = tape.param(self.ids.type_embeddings);
        let b_types = tape.param(self.ids.type_bias);
        let probs = classify(tape, r, w_types, b_types)?;
        Ok(ForwardVars {
            outputs,
            h,
            alpha,
            r_c,
            r_a,
            r_l,
            r,
            probs,
        })
    }

    fn lstm_vars(&self, tape: &mut Tape<'_>, p: LstmParams) -> LstmVars {
        LstmVars {
            kernel: tape.param(p.kernel),
            bias: tape.param(p.bias),
            hidden: self.config.hidden,
        }
    }

    /// Deterministic inference pass with every intermediate value.
    pub fn trace(&self, mention: &Mention, embeddings: &WordEmbeddings) -> Result<ForwardTrace> {
        let mut tape = self.tape();
        let v = self.forward(&mut tape, mention, embeddings, &mut Mode::Infer)?;
        let vec = |x: Var| tape.value(x).data().to_vec();
        Ok(ForwardTrace {
            h: tape.value(v.h).clone(),
            alpha: vec(v.alpha),
            r_c: vec(v.r_c),
            r_a: vec(v.r_a),
            r_l: vec(v.r_l),
            r: vec(v.r),
            probs: vec(v.probs),
        })
    }

    /// `p̂(y | m, c)` over all types, inference mode.
    pub fn probabilities(&self, mention: &Mention, embeddings: &WordEmbeddings) -> Result<Vec<f64>> {
        let mut tape = self.tape();
        let v = self.forward(&mut tape, mention, embeddings, &mut Mode::Infer)?;
        Ok(tape.value(v.probs).data().to_vec())
    }

    /// `argmax p̂`, ties to the lowest type index. With `adjust`, the argmax
    /// is taken over the hierarchy-adjusted distribution instead.
    pub fn predict(
        &self,
        mention: &Mention,
        embeddings: &WordEmbeddings,
        adjust: Option<(&AncestorLists, f64)>,
    ) -> Result<TypeId> {
        let mut probs = self.probabilities(mention, embeddings)?;
        if let Some((ancestors, beta)) = adjust {
            probs = crate::loss::adjust_with(&probs, ancestors, beta)?;
        }
        Ok(TypeId(argmax(&probs).expect("at least one type")))
    }
}

/// Dropout masks for one LSTM: input keep, output keep and the generator.
pub struct Dropout<'r> {
    pub input_keep: f64,
    pub output_keep: f64,
    pub rng: &'r mut SeededRng,
}

fn dropout_for<'a>(mode: &'a mut Mode<'_>, input_keep: f64, output_keep: f64) -> Option<Dropout<'a>> {
    match mode {
        Mode::Train(rng) => Some(Dropout {
            input_keep,
            output_keep,
            rng,
        }),
        Mode::Infer => None,
    }
}

/// One LSTM's recorded parameters.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub kernel: Var,
    pub bias: Var,
    pub hidden: usize,
}

fn apply_mask(tape: &mut Tape<'_>, x: Var, keep: f64, rng: &mut SeededRng) -> Result<Var> {
    if keep >= 1.0 {
        return Ok(x);
    }
    let mask = dropout_mask(tape.value(x).shape(), keep, rng)?;
    let m = tape.constant(mask);
    tape.mul(x, m)
}

/// Runs one LSTM over `inputs` (right to left when `reverse`), returning the
/// per-token outputs in input order. With dropout, each step's input and
/// emitted output are masked; the recurrent state is not.
pub fn lstm_sequence(
    tape: &mut Tape<'_>,
    inputs: &[Var],
    cell: LstmVars,
    reverse: bool,
    mut dropout: Option<&mut Dropout<'_>>,
) -> Result<Vec<Var>> {
    if inputs.is_empty() {
        return Err(Error::Empty("LSTM input sequence"));
    }
    let d = cell.hidden;
    let mut h = tape.constant(Tensor::zeros(&[d]));
    let mut c = tape.constant(Tensor::zeros(&[d]));
    let mut outputs = vec![h; inputs.len()];
    let order: Vec<usize> = if reverse {
        (0..inputs.len()).rev().collect()
    } else {
        (0..inputs.len()).collect()
    };
    for t in order {
        let mut x = inputs[t];
        if let Some(dr) = dropout.as_deref_mut() {
            x = apply_mask(tape, x, dr.input_keep, dr.rng)?;
        }
        let xh = tape.concat(&[x, h])?;
        let z = tape.matvec(cell.kernel, xh)?;
        let z = tape.add(z, cell.bias)?;
        let i_gate = tape.slice(z, 0, d)?;
        let f_gate = tape.slice(z, d, d)?;
        let g_gate = tape.slice(z, 2 * d, d)?;
        let o_gate = tape.slice(z, 3 * d, d)?;
        let i_gate = tape.sigmoid(i_gate);
        let f_gate = tape.sigmoid(f_gate);
        let g_gate = tape.tanh(g_gate);
        let o_gate = tape.sigmoid(o_gate);
        let keep = tape.mul(f_gate, c)?;
        let write = tape.mul(i_gate, g_gate)?;
        c = tape.add(keep, write)?;
        let squashed = tape.tanh(c);
        h = tape.mul(o_gate, squashed)?;
        outputs[t] = match dropout.as_deref_mut() {
            Some(dr) => apply_mask(tape, h, dr.output_keep, dr.rng)?,
            None => h,
        };
    }
    Ok(outputs)
}

/// Bidirectional context encoder: `h_i = h→_i + h←_i`.
pub fn bilstm_context(
    tape: &mut Tape<'_>,
    inputs: &[Var],
    forward: LstmVars,
    backward: LstmVars,
    mut dropout: Option<&mut Dropout<'_>>,
) -> Result<Vec<Var>> {
    let fw = lstm_sequence(tape, inputs, forward, false, dropout.as_deref_mut())?;
    let bw = lstm_sequence(tape, inputs, backward, true, dropout)?;
    fw.into_iter()
        .zip(bw)
        .map(|(a, b)| tape.add(a, b))
        .collect()
}

/// Word-level attention over the columns of `H`. Returns `(H, α, r_c)`.
pub fn attention(tape: &mut Tape<'_>, outputs: &[Var], w: Var) -> Result<(Var, Var, Var)> {
    let h = tape.stack_columns(outputs)?;
    let g = tape.tanh(h);
    let gt = tape.transpose(g)?;
    let scores = tape.matvec(gt, w)?;
    let alpha = tape.softmax(scores)?;
    let r_c = tape.matvec(h, alpha)?;
    Ok((h, alpha, r_c))
}

/// `r_a`: the mean of the mention's word vectors.
pub fn mention_average(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let first = vectors.first().ok_or(Error::Empty("mention"))?;
    let mut out = vec![0.0; first.len()];
    for v in vectors {
        if v.len() != out.len() {
            return Err(Error::shape("mention_average", "ragged word vectors"));
        }
        out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += x);
    }
    let n = vectors.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

/// `r_l`: last output of a left-to-right LSTM over the widened mention.
pub fn mention_lstm(
    tape: &mut Tape<'_>,
    extended: &[Var],
    cell: LstmVars,
    dropout: Option<&mut Dropout<'_>>,
) -> Result<Var> {
    let outputs = lstm_sequence(tape, extended, cell, false, dropout)?;
    Ok(*outputs.last().expect("non-empty"))
}

/// `softmax(W R + b)`.
pub fn classify(tape: &mut Tape<'_>, r: Var, w: Var, b: Var) -> Result<Var> {
    let logits = tape.matvec(w, r)?;
    let logits = tape.add(logits, b)?;
    tape.softmax(logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::TypeForest;
    use crate::optim::seeded_rng;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            word_dim: 3,
            position_dim: 2,
            hidden: 4,
            window: 3,
            num_types: 5,
            input_keep: 0.8,
            output_keep: 0.9,
            mention_dropout: true,
            mention_positions: false,
        }
    }

    fn tiny_embeddings() -> WordEmbeddings {
        WordEmbeddings::parse_text("a 0.1 0.2 0.3\nb -0.4 0.5 0.6\nc 0.7 -0.8 0.9\n", "e").unwrap()
    }

    fn tiny_mention(tokens: &[&str], start: usize, end: usize) -> Mention {
        let f = TypeForest::parse(["/a", "/b", "/c", "/d", "/e"]).unwrap();
        Mention::new(tokens.iter().map(|s| s.to_string()).collect(), start, end, vec![TypeId(0)], &f)
            .unwrap()
    }

    fn zero_lstm(tape: &mut Tape<'_>, input: usize, hidden: usize) -> LstmVars {
        LstmVars {
            kernel: tape.constant(Tensor::zeros(&[4 * hidden, input + hidden])),
            bias: tape.constant(Tensor::zeros(&[4 * hidden])),
            hidden,
        }
    }

    #[test]
    fn zero_weights_zero_outputs() {
        let mut tape = Tape::new();
        let inputs: Vec<Var> = (0..3).map(|_| tape.constant(Tensor::zeros(&[2]))).collect();
        let fw = zero_lstm(&mut tape, 2, 4);
        let bw = zero_lstm(&mut tape, 2, 4);
        let hs = bilstm_context(&mut tape, &inputs, fw, bw, None).unwrap();
        for h in hs {
            assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
        }
        let cell = zero_lstm(&mut tape, 2, 4);
        let r_l = mention_lstm(&mut tape, &inputs, cell, None).unwrap();
        assert!(tape.value(r_l).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_token_bilstm_sums_both_directions() {
        let mut rng = seeded_rng(5);
        let (k1, b1) = lstm_init(&mut rng, 2, 3);
        let (k2, b2) = lstm_init(&mut rng, 2, 3);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.3, -0.7]));
        let fw = LstmVars { kernel: tape.constant(k1), bias: tape.constant(b1), hidden: 3 };
        let bw = LstmVars { kernel: tape.constant(k2), bias: tape.constant(b2), hidden: 3 };
        let h = bilstm_context(&mut tape, &[x], fw, bw, None).unwrap();
        let f = lstm_sequence(&mut tape, &[x], fw, false, None).unwrap();
        let b = lstm_sequence(&mut tape, &[x], bw, true, None).unwrap();
        let sum: Vec<f64> = tape.value(f[0]).data().iter().zip(tape.value(b[0]).data()).map(|(a, b)| a + b).collect();
        assert_eq!(tape.value(h[0]).data(), &sum[..]);
    }

    #[test]
    fn attention_cases() {
        let mut tape = Tape::new();
        let h1 = tape.constant(Tensor::vector(vec![0.5, -1.0]));
        let w = tape.constant(Tensor::vector(vec![2.0, 3.0]));
        let (_, alpha, r_c) = attention(&mut tape, &[h1], w).unwrap();
        assert_eq!(tape.value(alpha).data(), &[1.0]);
        assert_eq!(tape.value(r_c).data(), &[0.5, -1.0]);

        let cols: Vec<Var> = [[1.0, 2.0], [3.0, -4.0], [5.0, 0.0]]
            .iter()
            .map(|c| tape.constant(Tensor::vector(c.to_vec())))
            .collect();
        let zero = tape.constant(Tensor::zeros(&[2]));
        let (_, alpha, r_c) = attention(&mut tape, &cols, zero).unwrap();
        for &a in tape.value(alpha).data() {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
        let rc = tape.value(r_c).data();
        assert!((rc[0] - 3.0).abs() < 1e-12 && (rc[1] + 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn attention_hand_computed() {
        // H = [[1, 0, -1], [0.5, 2, 0]], w = [1, -1].
        // scores_j = tanh(H_0j) - tanh(H_1j).
        let h_cols: [[f64; 2]; 3] = [[1.0, 0.5], [0.0, 2.0], [-1.0, 0.0]];
        let scores: Vec<f64> = h_cols.iter().map(|c| c[0].tanh() - c[1].tanh()).collect();
        let e: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let z: f64 = e.iter().sum();
        let alpha: Vec<f64> = e.iter().map(|x| x / z).collect();
        let r0: f64 = h_cols.iter().zip(&alpha).map(|(c, a)| c[0] * a).sum();
        let r1: f64 = h_cols.iter().zip(&alpha).map(|(c, a)| c[1] * a).sum();

        let mut tape = Tape::new();
        let cols: Vec<Var> = h_cols.iter().map(|c| tape.constant(Tensor::vector(c.to_vec()))).collect();
        let w = tape.constant(Tensor::vector(vec![1.0, -1.0]));
        let (h, a, rc) = attention(&mut tape, &cols, w).unwrap();
        assert_eq!(tape.value(h).shape(), &[2, 3]);
        for (got, want) in tape.value(a).data().iter().zip(&alpha) {
            assert!((got - want).abs() < 1e-14);
        }
        let rc = tape.value(rc).data();
        assert!((rc[0] - r0).abs() < 1e-14 && (rc[1] - r1).abs() < 1e-14);
        assert!((rc[0] - 0.401_483_635_855_243_6).abs() < 1e-12);
        assert!((rc[1] - 0.654_075_575_819_247_4).abs() < 1e-12);
    }

    #[test]
    fn mention_average_cases() {
        assert_eq!(mention_average(&[&[1.0, 2.0]]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(mention_average(&[&[3.0, 4.0], &[3.0, 4.0]]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(mention_average(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap(), vec![0.5, 0.5]);
        assert!(mention_average(&[]).is_err());
    }

    #[test]
    fn classify_cases() {
        let mut tape = Tape::new();
        let r = tape.constant(Tensor::vector(vec![0.3, -0.2]));
        let w = tape.constant(Tensor::zeros(&[4, 2]));
        let b = tape.constant(Tensor::zeros(&[4]));
        let p = classify(&mut tape, r, w, b).unwrap();
        assert_eq!(tape.value(p).data(), &[0.25; 4]);
        let b10 = tape.constant(Tensor::vector(vec![10.0, 0.0, 0.0, 0.0]));
        let p = classify(&mut tape, r, w, b10).unwrap();
        let probs = tape.value(p).data();
        assert_eq!(argmax(probs), Some(0));
        assert!(probs[0] > 0.9998);
    }

    #[test]
    fn forward_shapes_and_determinism() {
        let cfg = tiny_config();
        let model = Nfetc::new(cfg.clone(), &mut seeded_rng(1)).unwrap();
        let emb = tiny_embeddings();
        let m = tiny_mention(&["a", "b", "zzz", "c"], 1, 3);
        let t1 = model.trace(&m, &emb).unwrap();
        let t2 = model.trace(&m, &emb).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.h.shape(), &[cfg.hidden, 4]);
        assert_eq!(t1.alpha.len(), 4);
        assert_eq!(t1.r_c.len(), cfg.hidden);
        assert_eq!(t1.r_l.len(), cfg.hidden);
        assert_eq!(t1.r_a.len(), cfg.word_dim);
        assert_eq!(t1.r.len(), cfg.feature_dim());
        assert_eq!(t1.probs.len(), cfg.num_types);
        assert!((t1.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((t1.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // r_a averages "b" and the OOV token.
        assert_eq!(t1.r_a, vec![-0.2, 0.25, 0.3]);
    }

    #[test]
    fn training_mode_draws_dropout() {
        let model = Nfetc::new(tiny_config(), &mut seeded_rng(1)).unwrap();
        let emb = tiny_embeddings();
        let m = tiny_mention(&["a", "b", "c"], 0, 1);
        let run = |seed| {
            let mut rng = seeded_rng(seed);
            let mut tape = model.tape();
            let v = model.forward(&mut tape, &m, &emb, &mut Mode::Train(&mut rng)).unwrap();
            tape.value(v.probs).data().to_vec()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
        assert_ne!(run(3), model.probabilities(&m, &emb).unwrap());
    }

    #[test]
    fn from_params_rejects_wrong_shapes() {
        let cfg = tiny_config();
        let model = Nfetc::new(cfg.clone(), &mut seeded_rng(1)).unwrap();
        let mut other = cfg.clone();
        other.hidden = 5;
        assert!(Nfetc::from_params(other, model.params().clone()).is_err());
        assert!(Nfetc::from_params(cfg, model.params().clone()).is_ok());
    }

    #[test]
    fn orthogonal_rows() {
        let rows = orthogonal(&mut seeded_rng(2), 5);
        for i in 0..5 {
            for j in 0..5 {
                let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lstm_bias_init() {
        let (_, b) = lstm_init(&mut seeded_rng(0), 2, 3);
        assert_eq!(b.data(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
