//! Learnable building blocks shared across the fusion, edge, and decoder
//! stages: CLC stacks (two convolutions around a LeakyReLU),
//! depthwise-separable 3×3 convolutions, the DConv-Norm-ReLU-Upsample
//! compound, score MLPs, and a deterministic weight initializer.
//!
//! Every struct here pairs a set of `ParamId`s (registered once in a
//! `ParamStore`) with a `build` method that appends the block's ops to a
//! `Graph`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Graph, NodeId, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub mod feb;
pub mod frcab;
pub mod mpa;

/// Negative-side slope shared by every LeakyReLU in the network.
pub const LEAKY_SLOPE: f64 = 0.01;
/// StarReLU scale at initialization.
pub const STAR_RELU_SCALE: f64 = 0.8944;
/// StarReLU bias at initialization.
pub const STAR_RELU_BIAS: f64 = -0.4472;

/// Deterministic weight initializer: Kaiming fan-in normals for kernels,
/// plain normals for spectral filters. Draw order is fixed, so one seed
/// pins every parameter in the model.
pub struct WeightInit {
    rng: ChaCha8Rng,
}

impl WeightInit {
    pub fn new(seed: u64) -> Self {
        WeightInit { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// He initialization: N(0, √(2/fan_in)).
    pub fn kaiming(&mut self, shape: &[usize], fan_in: usize) -> Tensor {
        self.normal(shape, 0.0, (2.0 / fan_in as f64).sqrt())
    }

    pub fn normal(&mut self, shape: &[usize], mean: f64, std: f64) -> Tensor {
        let dist = Normal::new(mean, std).expect("finite normal parameters");
        let rng = &mut self.rng;
        Tensor::from_fn(shape, |_| dist.sample(rng))
    }
}

/// Pointwise stack Conv₁ → LeakyReLU → Conv₁ mapping `c_in → c_mid → c_out`
/// channels at every spatial position.
#[derive(Debug, Clone, Copy)]
pub struct Clc1Weights {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl Clc1Weights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c_in: usize,
        c_mid: usize,
        c_out: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        Ok(Clc1Weights {
            w1: store.register(format!("{prefix}.w1"), init.kaiming(&[c_mid, c_in], c_in))?,
            b1: store.register(format!("{prefix}.b1"), Tensor::zeros(&[c_mid]))?,
            w2: store.register(format!("{prefix}.w2"), init.kaiming(&[c_out, c_mid], c_mid))?,
            b2: store.register(format!("{prefix}.b2"), Tensor::zeros(&[c_out]))?,
        })
    }

    pub fn build(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let w1 = g.param(self.w1);
        let b1 = g.param(self.b1);
        let y = g.conv1x1(x, w1, b1)?;
        let y = g.leaky_relu(y, LEAKY_SLOPE)?;
        let w2 = g.param(self.w2);
        let b2 = g.param(self.b2);
        g.conv1x1(y, w2, b2)
    }
}

/// 3×3 stack Conv₃ → LeakyReLU → Conv₃, channel-preserving, padding 1.
#[derive(Debug, Clone, Copy)]
pub struct Clc3Weights {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl Clc3Weights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        Ok(Clc3Weights {
            w1: store.register(format!("{prefix}.w1"), init.kaiming(&[c, c, 3, 3], 9 * c))?,
            b1: store.register(format!("{prefix}.b1"), Tensor::zeros(&[c]))?,
            w2: store.register(format!("{prefix}.w2"), init.kaiming(&[c, c, 3, 3], 9 * c))?,
            b2: store.register(format!("{prefix}.b2"), Tensor::zeros(&[c]))?,
        })
    }

    pub fn build(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let w1 = g.param(self.w1);
        let b1 = g.param(self.b1);
        let y = g.conv2d(x, w1, b1, 1, 1)?;
        let y = g.leaky_relu(y, LEAKY_SLOPE)?;
        let w2 = g.param(self.w2);
        let b2 = g.param(self.b2);
        g.conv2d(y, w2, b2, 1, 1)
    }
}

/// Depthwise-separable 3×3 convolution: per-channel 3×3 (padding 1)
/// followed by a pointwise projection `c_in → c_out`.
#[derive(Debug, Clone, Copy)]
pub struct DConv3Weights {
    pub dw: ParamId,
    pub db: ParamId,
    pub pw: ParamId,
    pub pb: ParamId,
}

impl DConv3Weights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        Ok(DConv3Weights {
            dw: store.register(format!("{prefix}.dw"), init.kaiming(&[c_in, 3, 3], 9))?,
            db: store.register(format!("{prefix}.db"), Tensor::zeros(&[c_in]))?,
            pw: store.register(format!("{prefix}.pw"), init.kaiming(&[c_out, c_in], c_in))?,
            pb: store.register(format!("{prefix}.pb"), Tensor::zeros(&[c_out]))?,
        })
    }

    pub fn build(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let dw = g.param(self.dw);
        let db = g.param(self.db);
        let y = g.depthwise3(x, dw, db)?;
        let pw = g.param(self.pw);
        let pb = g.param(self.pb);
        g.conv1x1(y, pw, pb)
    }
}

/// Per-channel affine for layer normalization.
#[derive(Debug, Clone, Copy)]
pub struct NormAffine {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl NormAffine {
    pub fn register(store: &mut ParamStore, prefix: &str, c: usize) -> Result<Self> {
        Ok(NormAffine {
            gamma: store.register(format!("{prefix}.gamma"), Tensor::full(&[c], 1.0))?,
            beta: store.register(format!("{prefix}.beta"), Tensor::zeros(&[c]))?,
        })
    }

    pub fn build(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        g.layer_norm(x, gamma, beta)
    }
}

/// Learnable StarReLU scalars (scale and bias).
#[derive(Debug, Clone, Copy)]
pub struct StarReluWeights {
    pub s: ParamId,
    pub b: ParamId,
}

impl StarReluWeights {
    pub fn register(store: &mut ParamStore, prefix: &str) -> Result<Self> {
        Ok(StarReluWeights {
            s: store.register(format!("{prefix}.s"), Tensor::full(&[1], STAR_RELU_SCALE))?,
            b: store.register(format!("{prefix}.b"), Tensor::full(&[1], STAR_RELU_BIAS))?,
        })
    }

    pub fn build(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let s = g.param(self.s);
        let b = g.param(self.b);
        g.star_relu(x, s, b)
    }
}

/// DConv₃ → Norm → ReLU → UP compound. The upsample factor is chosen at
/// build time: 2 for the standard decoder compound, 1 where the caller
/// needs the same resolution back.
#[derive(Debug, Clone, Copy)]
pub struct DnruWeights {
    pub dconv: DConv3Weights,
    pub norm: NormAffine,
}

impl DnruWeights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        Ok(DnruWeights {
            dconv: DConv3Weights::register(store, &format!("{prefix}.dconv"), c_in, c_out, init)?,
            norm: NormAffine::register(store, &format!("{prefix}.norm"), c_out)?,
        })
    }

    pub fn build(&self, g: &mut Graph, x: NodeId, factor: usize) -> Result<NodeId> {
        if factor != 1 && factor != 2 {
            return Err(Error::contract(format!(
                "dnru upsample factor must be 1 or 2, got {factor}"
            )));
        }
        let y = self.dconv.build(g, x)?;
        let y = self.norm.build(g, y)?;
        let y = g.relu(y)?;
        g.upsample(y, factor)
    }
}

/// Two dense layers around a LeakyReLU: `c_in → max(c_in/4, 4) → c_out`.
#[derive(Debug, Clone, Copy)]
pub struct MlpWeights {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl MlpWeights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        let hidden = (c_in / 4).max(4);
        Ok(MlpWeights {
            w1: store.register(format!("{prefix}.w1"), init.kaiming(&[hidden, c_in], c_in))?,
            b1: store.register(format!("{prefix}.b1"), Tensor::zeros(&[hidden]))?,
            w2: store.register(format!("{prefix}.w2"), init.kaiming(&[c_out, hidden], hidden))?,
            b2: store.register(format!("{prefix}.b2"), Tensor::zeros(&[c_out]))?,
        })
    }

    pub fn build(&self, g: &mut Graph, v: NodeId) -> Result<NodeId> {
        let w1 = g.param(self.w1);
        let b1 = g.param(self.b1);
        let h = g.matvec(w1, v, b1)?;
        let h = g.leaky_relu(h, LEAKY_SLOPE)?;
        let w2 = g.param(self.w2);
        let b2 = g.param(self.b2);
        g.matvec(w2, h, b2)
    }
}
