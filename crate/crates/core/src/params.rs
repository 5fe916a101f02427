//! Named parameter storage.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a parameter inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Ordered set of uniquely named tensors, each trainable or frozen.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}`")));
        }
        let id = self.params.len();
        self.index.insert(name.to_string(), id);
        self.params.push(Param {
            name: name.to_string(),
            value,
            trainable,
        });
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    /// Mutable access to a parameter's values. Frozen parameters refuse.
    pub fn value_mut(&mut self, id: ParamId) -> Result<&mut Tensor> {
        let p = &mut self.params[id.0];
        if !p.trainable {
            return Err(Error::InvalidArgument(format!(
                "parameter `{}` is frozen",
                p.name
            )));
        }
        Ok(&mut p.value)
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    /// Squared L2 norm over trainable parameters only.
    pub fn l2_norm_sq(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.sum_squares())
            .sum()
    }

    pub fn num_trainable_values(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }
}

/// Per-parameter gradients, aligned with a [`ParamSet`].
///
/// Frozen and unreachable parameters hold zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
    names: Vec<String>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Gradients {
            grads: params
                .params
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect(),
            names: params.params.iter().map(|p| p.name.clone()).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.grads[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.grads)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub(crate) fn accumulate(&mut self, id: usize, g: &[f64], scale: f64) {
        for (acc, v) in self.grads[id].data_mut().iter_mut().zip(g) {
            *acc += scale * v;
        }
    }

    /// Adds `2·λ·θ` for every trainable parameter, the gradient of `λ‖Θ‖²`.
    pub fn add_l2(&mut self, params: &ParamSet, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        for (g, p) in self.grads.iter_mut().zip(&params.params) {
            if !p.trainable {
                continue;
            }
            for (gv, pv) in g.data_mut().iter_mut().zip(p.value.data()) {
                *gv += 2.0 * lambda * pv;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(Tensor::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut ps = ParamSet::new();
        ps.add("a", Tensor::scalar(1.0), true).unwrap();
        assert!(ps.add("a", Tensor::scalar(2.0), true).is_err());
    }

    #[test]
    fn frozen_values_are_read_only() {
        let mut ps = ParamSet::new();
        let id = ps.add("emb", Tensor::vector(vec![1.0, 2.0]), false).unwrap();
        assert!(ps.value_mut(id).is_err());
        assert_eq!(ps.l2_norm_sq(), 0.0);
    }
}
