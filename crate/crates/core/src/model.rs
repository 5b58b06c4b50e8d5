//! End-to-end network assembly: a dual-stream spectral encoder, one fusion
//! attention block per stage, the two-level edge branch, and the
//! low-to-high-resolution attention decoder, producing a saliency map, an
//! edge map, and the intermediate features the losses supervise.

use crate::autodiff::{Graph, NodeId, ParamId, ParamStore};
use crate::blocks::feb::{efeb, feb, EfebWeights};
use crate::blocks::frcab::{frcab, FrcabWeights};
use crate::blocks::mpa::{dynamic_filter_from, mpa, DynamicFilterBank, MpaWeights};
use crate::blocks::{DConv3Weights, DnruWeights, NormAffine, WeightInit};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Network hyperparameters. `input_size` must be divisible by 32 (the stem
/// divides by 4 and each later stage by 2, five halvings in total).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_size: usize,
    pub stage_channels: [usize; 4],
    pub stage_depths: [usize; 4],
    pub n_filters: usize,
    pub c_edge: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_size: 64,
            stage_channels: [16, 32, 64, 128],
            stage_depths: [1, 1, 1, 1],
            n_filters: 8,
            c_edge: 16,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 32 != 0 {
            return Err(Error::contract(format!(
                "input_size must be a positive multiple of 32, got {}",
                self.input_size
            )));
        }
        if self.stage_channels.iter().any(|&c| c == 0) || self.stage_depths.iter().any(|&d| d == 0)
        {
            return Err(Error::contract("stage channels and depths must be positive"));
        }
        if self.n_filters == 0 || self.c_edge == 0 {
            return Err(Error::contract("n_filters and c_edge must be positive"));
        }
        Ok(())
    }

    /// Spatial extent of stage `i` features (i = 0..3): input/4, /8, /16, /32.
    pub fn stage_size(&self, i: usize) -> usize {
        self.input_size / (4 << i)
    }
}

/// One encoder block: residual spectral mixing with a dynamic filter, then
/// a residual depthwise FFN, each behind its own normalization.
struct StageBlockWeights {
    norm1: NormAffine,
    bank: DynamicFilterBank,
    norm2: NormAffine,
    ffn: DConv3Weights,
}

impl StageBlockWeights {
    fn register(
        store: &mut ParamStore,
        prefix: &str,
        c: usize,
        n_filters: usize,
        size: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        Ok(StageBlockWeights {
            norm1: NormAffine::register(store, &format!("{prefix}.norm1"), c)?,
            bank: DynamicFilterBank::register(
                store,
                &format!("{prefix}.bank"),
                c,
                n_filters,
                size,
                size,
                init,
            )?,
            norm2: NormAffine::register(store, &format!("{prefix}.norm2"), c)?,
            ffn: DConv3Weights::register(store, &format!("{prefix}.ffn"), c, c, init)?,
        })
    }

    fn build(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let (_, _, width) = g.value(x).as_real()?.dims3()?;
        let xn = self.norm1.build(g, x)?;
        let spec = g.rfft2(xn)?;
        let df = dynamic_filter_from(g, xn, &self.bank)?;
        let shaped = g.cmul(spec, df)?;
        let mixed = g.irfft2(shaped, width)?;
        let x = g.add(x, mixed)?;
        let xn2 = self.norm2.build(g, x)?;
        let f = self.ffn.build(g, xn2)?;
        g.add(x, f)
    }
}

/// One modality's encoder: a 4×4 stride-4 stem, then three 2×2 stride-2
/// reductions, each stage a stack of spectral-mixing blocks.
struct StreamWeights {
    stem_w: ParamId,
    stem_b: ParamId,
    downs: Vec<(ParamId, ParamId)>,
    stages: Vec<Vec<StageBlockWeights>>,
}

impl StreamWeights {
    fn register(
        store: &mut ParamStore,
        prefix: &str,
        cfg: &ModelConfig,
        init: &mut WeightInit,
    ) -> Result<Self> {
        let ch = cfg.stage_channels;
        let stem_w = store.register(
            format!("{prefix}.stem.w"),
            init.kaiming(&[ch[0], 3, 4, 4], 3 * 16),
        )?;
        let stem_b = store.register(format!("{prefix}.stem.b"), Tensor::zeros(&[ch[0]]))?;
        let mut downs = Vec::new();
        for i in 1..4 {
            let w = store.register(
                format!("{prefix}.down{i}.w"),
                init.kaiming(&[ch[i], ch[i - 1], 2, 2], 4 * ch[i - 1]),
            )?;
            let b = store.register(format!("{prefix}.down{i}.b"), Tensor::zeros(&[ch[i]]))?;
            downs.push((w, b));
        }
        let mut stages = Vec::new();
        for i in 0..4 {
            let mut blocks = Vec::new();
            for d in 0..cfg.stage_depths[i] {
                blocks.push(StageBlockWeights::register(
                    store,
                    &format!("{prefix}.s{i}.b{d}"),
                    ch[i],
                    cfg.n_filters,
                    cfg.stage_size(i),
                    init,
                )?);
            }
            stages.push(blocks);
        }
        Ok(StreamWeights { stem_w, stem_b, downs, stages })
    }

    fn build(&self, g: &mut Graph, x: NodeId) -> Result<[NodeId; 4]> {
        let stem_w = g.param(self.stem_w);
        let stem_b = g.param(self.stem_b);
        let mut x = g.conv2d(x, stem_w, stem_b, 4, 0)?;
        let mut feats = Vec::with_capacity(4);
        for i in 0..4 {
            if i > 0 {
                let (w, b) = self.downs[i - 1];
                let wn = g.param(w);
                let bn = g.param(b);
                x = g.conv2d(x, wn, bn, 2, 0)?;
            }
            for block in &self.stages[i] {
                x = block.build(g, x)?;
            }
            feats.push(x);
        }
        Ok([feats[0], feats[1], feats[2], feats[3]])
    }
}

/// Every learnable tensor in the network, registered in one deterministic
/// pass so a seed pins the whole initialization.
pub struct ModelWeights {
    pub cfg: ModelConfig,
    rgb: StreamWeights,
    thermal: StreamWeights,
    fusion: Vec<MpaWeights>,
    efeb1: EfebWeights,
    efeb2: EfebWeights,
    edge_merge: DnruWeights,
    decode: Vec<FrcabWeights>,
    final_dnru: DnruWeights,
    sal_head_w: ParamId,
    sal_head_b: ParamId,
    edge_head: DConv3Weights,
    side_heads: Vec<DConv3Weights>,
    pub cfm_r_head: DConv3Weights,
    pub cfm_t_head: DConv3Weights,
}

impl ModelWeights {
    pub fn register(store: &mut ParamStore, cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init = WeightInit::new(cfg.seed);
        let ch = cfg.stage_channels;
        let rgb = StreamWeights::register(store, "rgb", cfg, &mut init)?;
        let thermal = StreamWeights::register(store, "th", cfg, &mut init)?;
        let mut fusion = Vec::new();
        for i in 0..4 {
            fusion.push(MpaWeights::register(
                store,
                &format!("mpa{i}"),
                ch[i],
                cfg.n_filters,
                cfg.stage_size(i),
                cfg.stage_size(i),
                &mut init,
            )?);
        }
        let efeb1 = EfebWeights::register(
            store,
            "efeb1",
            ch[0],
            cfg.c_edge,
            cfg.stage_size(0),
            cfg.stage_size(0),
            &mut init,
        )?;
        let efeb2 = EfebWeights::register(
            store,
            "efeb2",
            ch[1],
            cfg.c_edge,
            cfg.stage_size(1),
            cfg.stage_size(1),
            &mut init,
        )?;
        let edge_merge =
            DnruWeights::register(store, "feb", 2 * cfg.c_edge, cfg.c_edge, &mut init)?;
        // Decoder blocks listed from the deepest stage outward; each halves
        // the channel target of the next-shallower stage and doubles the
        // spatial extent.
        let decode = vec![
            FrcabWeights::register(store, "dec4", ch[3], ch[2], &mut init)?,
            FrcabWeights::register(store, "dec3", 2 * ch[2], ch[1], &mut init)?,
            FrcabWeights::register(store, "dec2", 2 * ch[1] + ch[2], ch[0], &mut init)?,
            FrcabWeights::register(store, "dec1", 2 * ch[0] + ch[1] + ch[2], ch[0], &mut init)?,
        ];
        let final_dnru =
            DnruWeights::register(store, "final", ch[0] + cfg.c_edge, ch[0], &mut init)?;
        let sal_head_w =
            store.register("sal_head.w", init.kaiming(&[1, ch[0]], ch[0]))?;
        let sal_head_b = store.register("sal_head.b", Tensor::zeros(&[1]))?;
        let edge_head = DConv3Weights::register(store, "edge_head", cfg.c_edge, 1, &mut init)?;
        let side_heads = vec![
            DConv3Weights::register(store, "side1", ch[0], 1, &mut init)?,
            DConv3Weights::register(store, "side2", ch[0], 1, &mut init)?,
            DConv3Weights::register(store, "side3", ch[1], 1, &mut init)?,
            DConv3Weights::register(store, "side4", ch[2], 1, &mut init)?,
        ];
        let cfm_r_head = DConv3Weights::register(store, "cfm_r", ch[0], 1, &mut init)?;
        let cfm_t_head = DConv3Weights::register(store, "cfm_t", ch[0], 1, &mut init)?;
        Ok(ModelWeights {
            cfg: cfg.clone(),
            rgb,
            thermal,
            fusion,
            efeb1,
            efeb2,
            edge_merge,
            decode,
            final_dnru,
            sal_head_w,
            sal_head_b,
            edge_head,
            side_heads,
            cfm_r_head,
            cfm_t_head,
        })
    }

    /// Per-level head mapping decoder feature `i` (1-based) to one channel.
    pub fn side_head(&self, i: usize) -> &DConv3Weights {
        &self.side_heads[i - 1]
    }
}

/// Node handles for everything the losses supervise. Values live on the
/// graph that produced them.
pub struct ForwardNodes {
    /// Saliency map, 1 × input² in (0,1).
    pub s: NodeId,
    /// Edge map, 1 × input² in (0,1).
    pub e_pred: NodeId,
    /// Decoder features d₁..d₄ (d[0] is the shallowest, largest one).
    pub d: [NodeId; 4],
    /// Merged edge feature at input/2 resolution.
    pub e3: NodeId,
    /// Stage-1 encoder features feeding the co-focus weights.
    pub r1: NodeId,
    pub t1: NodeId,
}

/// Plain-tensor snapshot of a forward pass.
#[derive(Debug, Clone)]
pub struct SaliencyBundle {
    pub s: Tensor,
    pub e_pred: Tensor,
    pub d: [Tensor; 4],
    pub e3: Tensor,
}

/// Both encoder streams. The thermal image may arrive single-channel (its
/// storage format); it is replicated to three channels here.
pub fn encode(
    g: &mut Graph,
    rgb: NodeId,
    thermal: NodeId,
    w: &ModelWeights,
) -> Result<([NodeId; 4], [NodeId; 4])> {
    let s = w.cfg.input_size;
    let rs = g.value(rgb).shape().to_vec();
    if rs != [3, s, s] {
        return Err(Error::shape(format!("rgb input must be [3, {s}, {s}], got {rs:?}")));
    }
    let ts = g.value(thermal).shape().to_vec();
    let thermal = match ts[..] {
        [3, th, tw] if th == s && tw == s => thermal,
        [1, th, tw] if th == s && tw == s => g.concat(&[thermal, thermal, thermal])?,
        _ => {
            return Err(Error::shape(format!(
                "thermal input must be [1|3, {s}, {s}], got {ts:?}"
            )))
        }
    };
    let r = w.rgb.build(g, rgb)?;
    let t = w.thermal.build(g, thermal)?;
    Ok((r, t))
}

/// Attention decoder over the fused features, edge-guided at the last
/// stage. Returns (d₁..d₄, saliency node).
pub fn decode(
    g: &mut Graph,
    f: &[NodeId; 4],
    e3: NodeId,
    w: &ModelWeights,
) -> Result<([NodeId; 4], NodeId)> {
    let d4 = frcab(g, f[3], &w.decode[0], 2)?;
    let cat3 = g.concat(&[f[2], d4])?;
    let d3 = frcab(g, cat3, &w.decode[1], 2)?;
    let d4_up2 = g.upsample(d4, 2)?;
    let cat2 = g.concat(&[f[1], d3, d4_up2])?;
    let d2 = frcab(g, cat2, &w.decode[2], 2)?;
    let d3_up2 = g.upsample(d3, 2)?;
    let d4_up4 = g.upsample(d4, 4)?;
    let cat1 = g.concat(&[f[0], d2, d3_up2, d4_up4])?;
    let d1 = frcab(g, cat1, &w.decode[3], 2)?;
    let cat0 = g.concat(&[d1, e3])?;
    let merged = w.final_dnru.build(g, cat0, 2)?;
    let hw = g.param(w.sal_head_w);
    let hb = g.param(w.sal_head_b);
    let logits = g.conv1x1(merged, hw, hb)?;
    let s = g.sigmoid(logits)?;
    Ok(([d1, d2, d3, d4], s))
}

/// Full forward pass: encode → fuse per stage → edge branch → decode.
pub fn forward(g: &mut Graph, rgb: NodeId, thermal: NodeId, w: &ModelWeights) -> Result<ForwardNodes> {
    let (r, t) = encode(g, rgb, thermal, w)?;
    let mut f = [r[0]; 4];
    for i in 0..4 {
        f[i] = mpa(g, r[i], t[i], &w.fusion[i])?;
    }
    let e1 = efeb(g, t[0], f[0], &w.efeb1)?;
    let e2 = efeb(g, t[1], f[1], &w.efeb2)?;
    let e3 = feb(g, e1, e2, &w.edge_merge)?;
    let (d, s) = decode(g, &f, e3, w)?;
    let edge_logits = w.edge_head.build(g, e3)?;
    let edge_up = g.upsample(edge_logits, 2)?;
    let e_pred = g.sigmoid(edge_up)?;
    Ok(ForwardNodes { s, e_pred, d, e3, r1: r[0], t1: t[0] })
}

/// Forward pass on a throwaway graph, returning plain tensors.
pub fn infer(
    store: &ParamStore,
    w: &ModelWeights,
    rgb: &Tensor,
    thermal: &Tensor,
) -> Result<SaliencyBundle> {
    let mut g = Graph::new(store);
    let rn = g.input(rgb.clone());
    let tn = g.input(thermal.clone());
    let nodes = forward(&mut g, rn, tn, w)?;
    let grab = |g: &Graph, n: NodeId| -> Result<Tensor> { Ok(g.value(n).as_real()?.clone()) };
    Ok(SaliencyBundle {
        s: grab(&g, nodes.s)?,
        e_pred: grab(&g, nodes.e_pred)?,
        d: [
            grab(&g, nodes.d[0])?,
            grab(&g, nodes.d[1])?,
            grab(&g, nodes.d[2])?,
            grab(&g, nodes.d[3])?,
        ],
        e3: grab(&g, nodes.e3)?,
    })
}
