//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding
//! its output value and the indices of its inputs. [`Tape::backward`] walks
//! the nodes in reverse, applying each op's hand-written adjoint, and
//! accumulates the result into per-parameter [`Gradients`].
//!
//! Parameters are borrowed from a [`ParamSet`] rather than copied, so a
//! tape per mention stays cheap even for large kernels.
//!
//! ```
//! use nfetc::{ParamSet, Tape, Tensor};
//!
//! let mut params = ParamSet::new();
//! let id = params.add("p", Tensor::vector(vec![1.0, -2.0, 3.0]), true).unwrap();
//! let mut tape = Tape::with_params(&params);
//! let p = tape.param(id);
//! let sq = tape.sum_squares(p);
//! let loss = tape.scale(sq, 0.5);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(id).data(), &[1.0, -2.0, 3.0]);
//! ```

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamId, ParamSet};
use crate::tensor::{dot, Tensor};

/// A recorded value on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Ancestor lists per type index, shared by hierarchy-mixing nodes.
pub type AncestorLists = Arc<Vec<Vec<usize>>>;

#[derive(Debug)]
enum Op {
    Leaf,
    Param(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddN(Vec<usize>),
    MatMul(usize, usize),
    MatVec(usize, usize),
    Transpose(usize),
    Sigmoid(usize),
    Tanh(usize),
    LnFloor(usize, f64),
    Softmax(usize),
    Normalize(usize),
    HierMix {
        input: usize,
        ancestors: AncestorLists,
        beta: f64,
    },
    Slice(usize, usize),
    Concat(Vec<usize>),
    StackColumns(Vec<usize>),
    Row(usize, usize),
    Pick(usize, usize),
    Sum(usize),
    SumSquares(usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Param(_) => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddN(_) => "add_n",
            Op::MatMul(..) => "matmul",
            Op::MatVec(..) => "matvec",
            Op::Transpose(_) => "transpose",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::LnFloor(..) => "ln",
            Op::Softmax(_) => "softmax",
            Op::Normalize(_) => "normalize",
            Op::HierMix { .. } => "hier_mix",
            Op::Slice(..) => "slice",
            Op::Concat(_) => "concat",
            Op::StackColumns(_) => "stack_columns",
            Op::Row(..) => "row",
            Op::Pick(..) => "pick",
            Op::Sum(_) => "sum",
            Op::SumSquares(_) => "sum_squares",
        }
    }
}

struct Node {
    // `None` for parameter nodes; their value lives in the borrowed ParamSet.
    value: Option<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Gradients for every node of a tape, indexed by [`Var`].
pub struct NodeGradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl NodeGradients {
    /// Gradient of the loss with respect to `v`; `None` if `v` does not
    /// influence the loss or does not require gradients.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }
}

pub struct Tape<'p> {
    params: Option<&'p ParamSet>,
    nodes: Vec<Node>,
    param_nodes: HashMap<usize, usize>,
    non_finite: Option<&'static str>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape {
            params: None,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            non_finite: None,
        }
    }

    pub fn with_params(params: &'p ParamSet) -> Self {
        Tape {
            params: Some(params),
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.val(v.0)
    }

    /// The first op that produced a non-finite value, if any.
    pub fn non_finite_op(&self) -> Option<&'static str> {
        self.non_finite
    }

    fn val(&self, i: usize) -> &Tensor {
        let node = &self.nodes[i];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(p)) => self.params.expect("param node without params").value(ParamId(*p)),
            _ => unreachable!("node {i} has no value"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        if self.non_finite.is_none() && !value.is_finite() {
            self.non_finite = Some(op.name());
        }
        self.nodes.push(Node {
            value: Some(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    /// A constant input; gradients are not propagated into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A free input that receives a gradient, readable via [`Tape::node_gradients`].
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// The node for parameter `id`. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&n) = self.param_nodes.get(&id.0) {
            return Var(n);
        }
        let params = self.params.expect("Tape::param needs Tape::with_params");
        let trainable = params.get(id).trainable;
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id.0),
            requires_grad: trainable,
        });
        let n = self.nodes.len() - 1;
        self.param_nodes.insert(id.0, n);
        Var(n)
    }

    /// Nodes of every parameter touched so far.
    pub fn param_vars(&self) -> Vec<(ParamId, Var)> {
        let mut out: Vec<_> = self
            .param_nodes
            .iter()
            .map(|(&p, &n)| (ParamId(p), Var(n)))
            .collect();
        out.sort_by_key(|(p, _)| p.0);
        out
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.val(a.0).shape(), self.val(b.0).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.val(a.0), self.val(b.0));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data).expect("shape preserved")
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let ta = self.val(a.0);
        Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|&x| f(x)).collect())
            .expect("shape preserved")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.zip_map(a, b, |x, y| x + y);
        let rg = self.rg(a.0) || self.rg(b.0);
        Ok(self.push(v, Op::Add(a.0, b.0), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.zip_map(a, b, |x, y| x - y);
        let rg = self.rg(a.0) || self.rg(b.0);
        Ok(self.push(v, Op::Sub(a.0, b.0), rg))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.zip_map(a, b, |x, y| x * y);
        let rg = self.rg(a.0) || self.rg(b.0);
        Ok(self.push(v, Op::Mul(a.0, b.0), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.map(a, |x| c * x);
        let rg = self.rg(a.0);
        self.push(v, Op::Scale(a.0, c), rg)
    }

    /// Sum of equally shaped values.
    pub fn add_n(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or(Error::Empty("add_n inputs"))?;
        let mut acc = self.val(first.0).clone();
        for &x in &xs[1..] {
            self.same_shape("add_n", first, x)?;
            for (a, b) in acc.data_mut().iter_mut().zip(self.val(x.0).data()) {
                *a += b;
            }
        }
        let rg = xs.iter().any(|x| self.rg(x.0));
        Ok(self.push(acc, Op::AddN(xs.iter().map(|x| x.0).collect()), rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.val(a.0).matmul(self.val(b.0))?;
        let rg = self.rg(a.0) || self.rg(b.0);
        Ok(self.push(v, Op::MatMul(a.0, b.0), rg))
    }

    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var> {
        let v = self.val(m.0).matvec(self.val(x.0))?;
        let rg = self.rg(m.0) || self.rg(x.0);
        Ok(self.push(v, Op::MatVec(m.0, x.0), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let v = self.val(a.0).transpose()?;
        let rg = self.rg(a.0);
        Ok(self.push(v, Op::Transpose(a.0), rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.map(a, sigmoid);
        let rg = self.rg(a.0);
        self.push(v, Op::Sigmoid(a.0), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.map(a, f64::tanh);
        let rg = self.rg(a.0);
        self.push(v, Op::Tanh(a.0), rg)
    }

    /// `ln(max(x, floor))`; the gradient is zero where the floor is active.
    pub fn ln_floor(&mut self, a: Var, floor: f64) -> Var {
        let v = self.map(a, |x| x.max(floor).ln());
        let rg = self.rg(a.0);
        self.push(v, Op::LnFloor(a.0, floor), rg)
    }

    /// Softmax over a 1-D value.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ta = self.val(a.0);
        if ta.shape().len() != 1 {
            return Err(Error::shape("softmax", format!("expected a vector, got {:?}", ta.shape())));
        }
        let v = Tensor::vector(crate::tensor::softmax(ta.data())?);
        let rg = self.rg(a.0);
        Ok(self.push(v, Op::Softmax(a.0), rg))
    }

    /// `x / Σx` for a positive-sum vector.
    pub fn normalize(&mut self, a: Var) -> Result<Var> {
        let total = self.val(a.0).sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "normalize needs a positive finite sum, got {total}"
            )));
        }
        let v = self.map(a, |x| x / total);
        let rg = self.rg(a.0);
        Ok(self.push(v, Op::Normalize(a.0), rg))
    }

    /// `q[y] = p[y] + β·Σ_{t ∈ ancestors[y]} p[t]` (no renormalisation).
    pub fn hier_mix(&mut self, a: Var, ancestors: &AncestorLists, beta: f64) -> Result<Var> {
        let p = self.val(a.0).data();
        if p.len() != ancestors.len() {
            return Err(Error::shape(
                "hier_mix",
                format!("{} probabilities for {} types", p.len(), ancestors.len()),
            ));
        }
        let q: Vec<f64> = ancestors
            .iter()
            .enumerate()
            .map(|(y, anc)| p[y] + beta * anc.iter().map(|&t| p[t]).sum::<f64>())
            .collect();
        let rg = self.rg(a.0);
        Ok(self.push(
            Tensor::vector(q),
            Op::HierMix {
                input: a.0,
                ancestors: Arc::clone(ancestors),
                beta,
            },
            rg,
        ))
    }

    /// Contiguous sub-vector `[start, start + len)`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ta = self.val(a.0);
        if ta.shape().len() != 1 || len == 0 || start + len > ta.len() {
            return Err(Error::shape(
                "slice",
                format!("[{start}, {}) of {:?}", start + len, ta.shape()),
            ));
        }
        let v = Tensor::vector(ta.data()[start..start + len].to_vec());
        let rg = self.rg(a.0);
        Ok(self.push(v, Op::Slice(a.0, start), rg))
    }

    /// Concatenation of 1-D values.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::Empty("concat inputs"));
        }
        let mut data = Vec::new();
        for x in xs {
            let t = self.val(x.0);
            if t.shape().len() != 1 {
                return Err(Error::shape("concat", format!("non-vector input {:?}", t.shape())));
            }
            data.extend_from_slice(t.data());
        }
        let rg = xs.iter().any(|x| self.rg(x.0));
        Ok(self.push(Tensor::vector(data), Op::Concat(xs.iter().map(|x| x.0).collect()), rg))
    }

    /// Builds a `d × T` matrix whose `j`-th column is `cols[j]`.
    pub fn stack_columns(&mut self, cols: &[Var]) -> Result<Var> {
        let first = *cols.first().ok_or(Error::Empty("stack_columns inputs"))?;
        let d = self.val(first.0).len();
        let t = cols.len();
        let mut data = vec![0.0; d * t];
        for (j, c) in cols.iter().enumerate() {
            let v = self.val(c.0);
            if v.shape() != [d] {
                return Err(Error::shape("stack_columns", format!("column {j} has shape {:?}", v.shape())));
            }
            for (i, &x) in v.data().iter().enumerate() {
                data[i * t + j] = x;
            }
        }
        let rg = cols.iter().any(|x| self.rg(x.0));
        let value = Tensor::matrix(d, t, data)?;
        Ok(self.push(value, Op::StackColumns(cols.iter().map(|x| x.0).collect()), rg))
    }

    /// Row `r` of a matrix, as a vector.
    pub fn row(&mut self, m: Var, r: usize) -> Result<Var> {
        let tm = self.val(m.0);
        if tm.shape().len() != 2 || r >= tm.rows() {
            return Err(Error::shape("row", format!("row {r} of {:?}", tm.shape())));
        }
        let v = Tensor::vector(tm.row(r).to_vec());
        let rg = self.rg(m.0);
        Ok(self.push(v, Op::Row(m.0, r), rg))
    }

    /// Element `i` of a flattened value, as a scalar.
    pub fn pick(&mut self, a: Var, i: usize) -> Result<Var> {
        let ta = self.val(a.0);
        if i >= ta.len() {
            return Err(Error::shape("pick", format!("index {i} of {:?}", ta.shape())));
        }
        let v = Tensor::scalar(ta.data()[i]);
        let rg = self.rg(a.0);
        Ok(self.push(v, Op::Pick(a.0, i), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.val(a.0).sum());
        let rg = self.rg(a.0);
        self.push(v, Op::Sum(a.0), rg)
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.val(a.0).sum_squares());
        let rg = self.rg(a.0);
        self.push(v, Op::SumSquares(a.0), rg)
    }

    /// Reverse pass from a scalar `loss`; gradients for every node.
    pub fn node_gradients(&self, loss: Var) -> Result<NodeGradients> {
        self.check_loss(loss)?;
        Ok(NodeGradients {
            grads: self.backprop(loss),
        })
    }

    /// Gradients of `loss` for every parameter in the borrowed set.
    ///
    /// Trainable parameters the loss does not reach, and all frozen
    /// parameters, get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let params = self.params.ok_or_else(|| {
            Error::InvalidArgument("backward needs a tape created with_params".into())
        })?;
        let mut grads = Gradients::zeros_like(params);
        self.backward_into(loss, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Accumulates `scale · ∂loss/∂θ` into `grads`.
    pub fn backward_into(&self, loss: Var, scale: f64, grads: &mut Gradients) -> Result<()> {
        self.check_loss(loss)?;
        let node_grads = self.backprop(loss);
        for (&p, &n) in &self.param_nodes {
            if let Some(g) = &node_grads[n] {
                grads.accumulate(p, g, scale);
            }
        }
        Ok(())
    }

    fn check_loss(&self, loss: Var) -> Result<()> {
        let t = self.val(loss.0);
        if !t.is_scalar() {
            return Err(Error::NotScalar(t.shape().to_vec()));
        }
        if let Some(op) = self.non_finite {
            return Err(Error::NonFinite { op });
        }
        Ok(())
    }

    fn backprop(&self, loss: Var) -> Vec<Option<Vec<f64>>> {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let g = match &self.nodes[i].op {
                Op::Leaf | Op::Param(_) => continue,
                _ => match grads[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        grads
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = self.val(i);
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::Add(a, b) => {
                self.acc(grads, *a, |ga| axpy(ga, 1.0, g));
                self.acc(grads, *b, |gb| axpy(gb, 1.0, g));
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, |ga| axpy(ga, 1.0, g));
                self.acc(grads, *b, |gb| axpy(gb, -1.0, g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.val(*a).data(), self.val(*b).data());
                self.acc(grads, *a, |ga| {
                    for ((x, gi), bi) in ga.iter_mut().zip(g).zip(vb) {
                        *x += gi * bi;
                    }
                });
                self.acc(grads, *b, |gb| {
                    for ((x, gi), ai) in gb.iter_mut().zip(g).zip(va) {
                        *x += gi * ai;
                    }
                });
            }
            Op::Scale(a, c) => self.acc(grads, *a, |ga| axpy(ga, *c, g)),
            Op::AddN(xs) => {
                for &x in xs {
                    self.acc(grads, x, |gx| axpy(gx, 1.0, g));
                }
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.val(*a), self.val(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                self.acc(grads, *a, |ga| {
                    for r in 0..m {
                        let g_row = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            ga[r * k + p] += dot(g_row, tb.row(p));
                        }
                    }
                });
                self.acc(grads, *b, |gb| {
                    for r in 0..m {
                        let g_row = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let a_rp = ta.data()[r * k + p];
                            if a_rp != 0.0 {
                                axpy(&mut gb[p * n..(p + 1) * n], a_rp, g_row);
                            }
                        }
                    }
                });
            }
            Op::MatVec(m, x) => {
                let (tm, tx) = (self.val(*m), self.val(*x));
                let k = tm.cols();
                self.acc(grads, *m, |gm| {
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            axpy(&mut gm[r * k..(r + 1) * k], gr, tx.data());
                        }
                    }
                });
                self.acc(grads, *x, |gx| {
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            axpy(gx, gr, tm.row(r));
                        }
                    }
                });
            }
            Op::Transpose(a) => {
                let ta = self.val(*a);
                let (m, n) = (ta.rows(), ta.cols());
                self.acc(grads, *a, |ga| {
                    for r in 0..m {
                        for c in 0..n {
                            ga[r * n + c] += g[c * m + r];
                        }
                    }
                });
            }
            Op::Sigmoid(a) => self.acc(grads, *a, |ga| {
                for ((x, gi), y) in ga.iter_mut().zip(g).zip(out.data()) {
                    *x += gi * y * (1.0 - y);
                }
            }),
            Op::Tanh(a) => self.acc(grads, *a, |ga| {
                for ((x, gi), y) in ga.iter_mut().zip(g).zip(out.data()) {
                    *x += gi * (1.0 - y * y);
                }
            }),
            Op::LnFloor(a, floor) => {
                let va = self.val(*a).data();
                self.acc(grads, *a, |ga| {
                    for ((x, gi), &ai) in ga.iter_mut().zip(g).zip(va) {
                        if ai > *floor {
                            *x += gi / ai;
                        }
                    }
                });
            }
            Op::Softmax(a) => {
                let y = out.data();
                let gy = dot(g, y);
                self.acc(grads, *a, |ga| {
                    for ((x, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        *x += yi * (gi - gy);
                    }
                });
            }
            Op::Normalize(a) => {
                let y = out.data();
                let total = self.val(*a).sum();
                let gy = dot(g, y);
                self.acc(grads, *a, |ga| {
                    for (x, gi) in ga.iter_mut().zip(g) {
                        *x += (gi - gy) / total;
                    }
                });
            }
            Op::HierMix {
                input,
                ancestors,
                beta,
            } => self.acc(grads, *input, |gp| {
                for (y, anc) in ancestors.iter().enumerate() {
                    gp[y] += g[y];
                    for &t in anc {
                        gp[t] += beta * g[y];
                    }
                }
            }),
            Op::Slice(a, start) => self.acc(grads, *a, |ga| {
                axpy(&mut ga[*start..*start + g.len()], 1.0, g);
            }),
            Op::Concat(xs) => {
                let mut offset = 0;
                for &x in xs {
                    let len = self.val(x).len();
                    self.acc(grads, x, |gx| axpy(gx, 1.0, &g[offset..offset + len]));
                    offset += len;
                }
            }
            Op::StackColumns(cols) => {
                let t = cols.len();
                for (j, &c) in cols.iter().enumerate() {
                    self.acc(grads, c, |gc| {
                        for (r, x) in gc.iter_mut().enumerate() {
                            *x += g[r * t + j];
                        }
                    });
                }
            }
            Op::Row(m, r) => {
                let cols = self.val(*m).cols();
                self.acc(grads, *m, |gm| axpy(&mut gm[r * cols..(r + 1) * cols], 1.0, g));
            }
            Op::Pick(a, idx) => self.acc(grads, *a, |ga| ga[*idx] += g[0]),
            Op::Sum(a) => self.acc(grads, *a, |ga| ga.iter_mut().for_each(|x| *x += g[0])),
            Op::SumSquares(a) => {
                let va = self.val(*a).data();
                self.acc(grads, *a, |ga| axpy(ga, 2.0 * g[0], va));
            }
        }
    }

    fn acc(&self, grads: &mut [Option<Vec<f64>>], target: usize, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[target].requires_grad {
            return;
        }
        let slot = grads[target].get_or_insert_with(|| vec![0.0; self.val(target).len()]);
        f(slot);
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Checks every `variable` input of `build` against central differences.
    fn gradcheck(inputs: Vec<Tensor>, build: impl Fn(&mut Tape, &[Var]) -> Var) {
        let eval = |vals: &[Tensor]| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = vals.iter().map(|t| tape.variable(t.clone())).collect();
            let out = build(&mut tape, &vars);
            tape.value(out).data()[0]
        };
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
        let out = build(&mut tape, &vars);
        let grads = tape.node_gradients(out).unwrap();
        let h = 1e-5;
        for (k, v) in vars.iter().enumerate() {
            let analytic = grads.get(*v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[k].len()]);
            for (j, &a) in analytic.iter().enumerate() {
                let mut plus = inputs.clone();
                plus[k].data_mut()[j] += h;
                let mut minus = inputs.clone();
                minus[k].data_mut()[j] -= h;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let denom = numeric.abs().max(a.abs()).max(1e-8);
                let rel = (numeric - a).abs() / denom;
                assert!(
                    rel < 1e-4 || (numeric - a).abs() < 1e-9,
                    "input {k}[{j}]: analytic {a} numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn sum_gives_ones() {
        let mut params = ParamSet::new();
        let id = params.add("p", Tensor::zeros(&[2, 3]), true).unwrap();
        let mut tape = Tape::with_params(&params);
        let p = tape.param(id);
        let loss = tape.sum(p);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(id).data(), &[1.0; 6]);
    }

    #[test]
    fn unreachable_and_frozen_get_zero() {
        let mut params = ParamSet::new();
        let a = params.add("a", Tensor::vector(vec![1.0, 2.0]), true).unwrap();
        let b = params.add("b", Tensor::vector(vec![3.0]), true).unwrap();
        let c = params.add("c", Tensor::vector(vec![4.0, 5.0]), false).unwrap();
        let mut tape = Tape::with_params(&params);
        let va = tape.param(a);
        let vc = tape.param(c);
        let prod = tape.mul(va, vc).unwrap();
        let loss = tape.sum(prod);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(a).data(), &[4.0, 5.0]);
        assert_eq!(g.get(b).data(), &[0.0]);
        assert_eq!(g.get(c).data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let v = tape.variable(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.node_gradients(v), Err(Error::NotScalar(_))));
    }

    #[test]
    fn non_finite_values_poison_the_tape() {
        let mut tape = Tape::new();
        let v = tape.variable(Tensor::vector(vec![f64::MAX, 2.0]));
        let big = tape.scale(v, 10.0);
        let s = tape.sum(big);
        assert_eq!(tape.non_finite_op(), Some("scale"));
        assert!(matches!(tape.node_gradients(s), Err(Error::NonFinite { op: "scale" })));
    }

    #[test]
    fn elementwise_ops_pass_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs = vec![random(&mut rng, &[5]), random(&mut rng, &[5])];
        gradcheck(inputs, |t, v| {
            let a = t.add(v[0], v[1]).unwrap();
            let s = t.sub(a, v[1]).unwrap();
            let m = t.mul(s, v[1]).unwrap();
            let sg = t.sigmoid(m);
            let th = t.tanh(v[0]);
            let x = t.mul(sg, th).unwrap();
            let y = t.scale(x, 3.0);
            let z = t.add_n(&[y, v[0], v[1]]).unwrap();
            let sq = t.sum_squares(z);
            let p = t.pick(z, 2).unwrap();
            let both = t.concat(&[sq, p]).unwrap();
            t.sum(both)
        });
    }

    #[test]
    fn matrix_ops_pass_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inputs = vec![
            random(&mut rng, &[3, 4]),
            random(&mut rng, &[4, 2]),
            random(&mut rng, &[4]),
        ];
        gradcheck(inputs, |t, v| {
            let mm = t.matmul(v[0], v[1]).unwrap();
            let tr = t.transpose(mm).unwrap();
            let r = t.row(tr, 1).unwrap();
            let mv = t.matvec(v[0], v[2]).unwrap();
            let sl = t.slice(mv, 1, 2).unwrap();
            let c = t.concat(&[r, sl]).unwrap();
            let th = t.tanh(c);
            t.sum_squares(th)
        });
    }

    #[test]
    fn stack_and_softmax_pass_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs = vec![
            random(&mut rng, &[3]),
            random(&mut rng, &[3]),
            random(&mut rng, &[3]),
            random(&mut rng, &[3]),
        ];
        gradcheck(inputs, |t, v| {
            let h = t.stack_columns(&v[..3]).unwrap();
            let g = t.tanh(h);
            let gt = t.transpose(g).unwrap();
            let scores = t.matvec(gt, v[3]).unwrap();
            let alpha = t.softmax(scores).unwrap();
            let rc = t.matvec(h, alpha).unwrap();
            let w = t.mul(rc, v[3]).unwrap();
            t.sum(w)
        });
    }

    #[test]
    fn hierarchy_mix_normalize_and_log_pass_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let anc: AncestorLists = Arc::new(vec![vec![], vec![0], vec![0, 1], vec![]]);
        let inputs = vec![random(&mut rng, &[4])];
        gradcheck(inputs, move |t, v| {
            let p = t.softmax(v[0]).unwrap();
            let q = t.hier_mix(p, &anc, 0.4).unwrap();
            let n = t.normalize(q).unwrap();
            let pick = t.pick(n, 2).unwrap();
            let l = t.ln_floor(pick, 1e-12);
            t.scale(l, -1.0)
        });
    }

    #[test]
    fn param_nodes_are_shared() {
        let mut params = ParamSet::new();
        let id = params.add("w", Tensor::vector(vec![2.0]), true).unwrap();
        let mut tape = Tape::with_params(&params);
        let a = tape.param(id);
        let b = tape.param(id);
        assert_eq!(a, b);
        let m = tape.mul(a, b).unwrap();
        let g = tape.backward(m).unwrap();
        assert_eq!(g.get(id).data(), &[4.0]);
    }
}
