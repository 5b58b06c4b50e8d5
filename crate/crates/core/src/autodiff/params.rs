//! Named parameter storage with Adam state. Registration order is stable
//! and is the serialization order for checkpoints.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to one registered parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

struct Param {
    name: String,
    value: Tensor,
    /// Adam first/second moment estimates.
    m: Tensor,
    v: Tensor,
}

#[derive(Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, usize>,
}

/// Per-parameter gradients produced by one backward pass; `None` means the
/// parameter did not appear in the graph (treated as a zero gradient).
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub(crate) fn new(n: usize) -> Self {
        Gradients { grads: vec![None; n] }
    }

    pub(crate) fn set(&mut self, id: ParamId, g: Tensor) {
        self.grads[id.0] = Some(g);
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Elementwise sum, used to merge per-image gradients in a fixed order.
    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        if self.grads.len() != other.grads.len() {
            return Err(Error::contract(format!(
                "gradient sets cover {} vs {} parameters",
                self.grads.len(),
                other.grads.len()
            )));
        }
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            match (mine.as_mut(), theirs) {
                (_, None) => {}
                (None, Some(t)) => *mine = Some(t.clone()),
                (Some(a), Some(b)) => *a = a.add(b)?,
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.grads.iter_mut().flatten() {
            *g = g.scale(s);
        }
    }
}

/// Adam hyperparameters; `new` fills the conventional defaults.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter under a unique name and returns its handle.
    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::contract(format!("parameter `{name}` registered twice")));
        }
        let ix = self.params.len();
        self.by_name.insert(name.clone(), ix);
        let m = Tensor::zeros(value.shape());
        let v = Tensor::zeros(value.shape());
        self.params.push(Param { name, value, m, v });
        Ok(ParamId(ix))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn total_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn name_of(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    /// Handles in registration order.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Bias-corrected Adam update over every parameter. `t` counts steps
    /// from 1; gradients absent from `grads` act as zeros, so untouched
    /// parameters with untouched moments stay exactly where they are.
    pub fn adam_step(&mut self, grads: &Gradients, cfg: &AdamConfig, t: usize) -> Result<()> {
        if t == 0 {
            return Err(Error::contract("Adam step index starts at 1"));
        }
        if grads.len() != self.params.len() {
            return Err(Error::contract(format!(
                "gradient set covers {} of {} parameters",
                grads.len(),
                self.params.len()
            )));
        }
        let bc1 = 1.0 - cfg.beta1.powi(t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(t as i32);
        for (ix, p) in self.params.iter_mut().enumerate() {
            let zero;
            let g = match &grads.grads[ix] {
                Some(g) => {
                    if g.shape() != p.value.shape() {
                        return Err(Error::shape(format!(
                            "gradient for `{}` has shape {:?}, parameter {:?}",
                            p.name,
                            g.shape(),
                            p.value.shape()
                        )));
                    }
                    g
                }
                None => {
                    zero = Tensor::zeros(p.value.shape());
                    &zero
                }
            };
            for i in 0..p.value.numel() {
                let gi = g.data()[i];
                let m = cfg.beta1 * p.m.data()[i] + (1.0 - cfg.beta1) * gi;
                let v = cfg.beta2 * p.v.data()[i] + (1.0 - cfg.beta2) * gi * gi;
                p.m.data_mut()[i] = m;
                p.v.data_mut()[i] = v;
                let mhat = m / bc1;
                let vhat = v / bc2;
                p.value.data_mut()[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}
