//! Tape-based reverse-mode differentiation. A `Graph` records one node per
//! executed op (values computed eagerly); `backward` walks the tape in
//! reverse, feeding each node's cotangent through its hand-written
//! vector-Jacobian product.
//!
//! Complex nodes are differentiated by treating the real and imaginary
//! planes as independent real quantities — every loss here is real, so no
//! holomorphic machinery is needed.

pub mod gradcheck;
pub mod ops;
pub mod params;

pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use params::{AdamConfig, Gradients, ParamId, ParamStore};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::spectral::ComplexTensor;
use crate::tensor::Tensor;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Forward value of a node.
#[derive(Debug, Clone)]
pub enum Value {
    Real(Tensor),
    Complex(ComplexTensor),
}

impl Value {
    pub fn shape(&self) -> &[usize] {
        match self {
            Value::Real(t) => t.shape(),
            Value::Complex(t) => t.shape(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Value::Real(t) => t.is_finite(),
            Value::Complex(t) => t.is_finite(),
        }
    }

    fn add(&self, rhs: &Value) -> Result<Value> {
        match (self, rhs) {
            (Value::Real(a), Value::Real(b)) => Ok(Value::Real(a.add(b)?)),
            (Value::Complex(a), Value::Complex(b)) => Ok(Value::Complex(a.add(b)?)),
            _ => Err(Error::contract("cannot mix real and complex cotangents")),
        }
    }

    pub fn as_real(&self) -> Result<&Tensor> {
        match self {
            Value::Real(t) => Ok(t),
            Value::Complex(_) => Err(Error::contract("expected a real node")),
        }
    }

    pub fn as_complex(&self) -> Result<&ComplexTensor> {
        match self {
            Value::Complex(t) => Ok(t),
            Value::Real(_) => Err(Error::contract("expected a complex node")),
        }
    }
}

/// Given this node's cotangent, produce one cotangent per parent.
type BackFn = Box<dyn Fn(&Value) -> Result<Vec<Value>>>;

struct Node {
    op: &'static str,
    value: Value,
    parents: Vec<NodeId>,
    back: Option<BackFn>,
}

/// One forward pass worth of tape, tied to the store its parameters came
/// from. Dropping the graph drops all recorded activations.
pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<usize, NodeId>,
    grads: Vec<Option<Value>>,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Graph { store, nodes: Vec::new(), param_nodes: HashMap::new(), grads: Vec::new() }
    }

    /// The parameter store this graph reads leaf values from.
    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub(crate) fn push(&mut self, op: &'static str, value: Value, parents: Vec<NodeId>, back: Option<BackFn>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value, parents, back });
        id
    }

    /// Leaf node for a parameter; repeated requests share one node so its
    /// gradient accumulates across every use.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id.0) {
            return n;
        }
        let value = Value::Real(self.store.value(id).clone());
        let n = self.push("param", value, vec![], None);
        self.param_nodes.insert(id.0, n);
        n
    }

    /// Leaf node for non-learnable data. Its gradient is still tracked, so
    /// callers can differentiate with respect to inputs.
    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.push("input", Value::Real(t), vec![], None)
    }

    pub fn value(&self, id: NodeId) -> &Value {
        &self.nodes[id.0].value
    }

    pub fn real(&self, id: NodeId) -> Result<&Tensor> {
        self.nodes[id.0].value.as_real()
    }

    pub fn complex(&self, id: NodeId) -> Result<&ComplexTensor> {
        self.nodes[id.0].value.as_complex()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Reverse sweep from a scalar loss. Leaf gradients survive the sweep
    /// (see `grad`, `param_grads`); interior ones are freed as soon as they
    /// have been propagated.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let lv = self.nodes[loss.0].value.as_real().map_err(|_| {
            Error::contract("backward needs a real scalar loss, got a complex node")
        })?;
        if lv.numel() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Value::Real(Tensor::scalar(1.0)));
        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Some(back) = &node.back {
                let parent_gs = back(&g)?;
                debug_assert_eq!(parent_gs.len(), node.parents.len());
                for (pid, pg) in node.parents.iter().zip(parent_gs) {
                    if !pg.is_finite() {
                        return Err(Error::NonFinite {
                            op: node.op,
                            detail: format!(
                                "cotangent flowing into node {} is not finite",
                                pid.0
                            ),
                        });
                    }
                    let slot = &mut self.grads[pid.0];
                    *slot = Some(match slot.take() {
                        None => pg,
                        Some(acc) => acc.add(&pg)?,
                    });
                }
            }
            if node.parents.is_empty() {
                self.grads[i] = Some(g);
            }
        }
        Ok(())
    }

    /// Cotangent of a leaf after `backward`; `None` if the loss does not
    /// depend on it.
    pub fn grad(&self, id: NodeId) -> Option<&Value> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradients for every registered parameter after `backward`.
    pub fn param_grads(&self) -> Result<Gradients> {
        let mut out = Gradients::new(self.store.len());
        for (&pix, &node) in &self.param_nodes {
            if let Some(g) = self.grads.get(node.0).and_then(|g| g.as_ref()) {
                out.set(ParamId(pix), g.as_real()?.clone());
            }
        }
        Ok(out)
    }
}
