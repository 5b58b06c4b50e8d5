//! Training objectives: region supervision (BCE + soft IoU) on the saliency
//! map and each decoder level, edge supervision, and a co-focus frequency
//! loss whose per-bin weights measure cross-modal spectral disagreement.

use crate::autodiff::{Graph, NodeId, ParamStore};
use crate::blocks::DConv3Weights;
use crate::canny::CannyParams;
use crate::error::{Error, Result};
use crate::model::{ForwardNodes, ModelWeights};
use crate::nn;
use crate::spectral::{
    amp_phase, complex_from, half_spectrum_weights, half_width, rfft2_spatial, ComplexTensor,
    SpectralPair,
};
use crate::tensor::Tensor;

/// Per-term weights and the co-focus exponent for the total objective.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    /// Multipliers for [saliency, levels, edge, co-focus] in that order.
    pub lambda: [f64; 4],
    /// Exponent on the spectral disagreement; 0 turns re-weighting off.
    pub alpha: f64,
    pub canny: CannyParams,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda: [1.0; 4], alpha: 1.0, canny: CannyParams::default() }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::contract(format!(
                "loss weights must be finite and nonnegative, got {:?}",
                self.lambda
            )));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::contract(format!(
                "co-focus exponent must be nonnegative, got {}",
                self.alpha
            )));
        }
        self.canny.validate()
    }
}

/// Raw (unweighted) values of each term plus the weighted total.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossBreakdown {
    pub saliency: f64,
    pub levels: f64,
    pub edge: f64,
    pub cfl: f64,
    pub total: f64,
}

fn check_binary(what: &str, t: &Tensor) -> Result<()> {
    if let Some(bad) = t.data().iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::contract(format!("{what} must be binary, found {bad}")));
    }
    Ok(())
}

/// Mean binary cross-entropy of a prediction node against a binary target.
pub fn bce_loss(g: &mut Graph, p: NodeId, target: &Tensor) -> Result<NodeId> {
    check_binary("cross-entropy target", target)?;
    g.bce_mean(p, target)
}

/// Soft IoU loss 1 − (Σp·g + 1)/(Σ(p + g − p·g) + 1). Exactly zero when the
/// prediction equals a binary target: numerator and denominator coincide
/// bit for bit and a single division maps them to 1.
pub fn iou_loss(g: &mut Graph, p: NodeId, target: &Tensor) -> Result<NodeId> {
    check_binary("overlap target", target)?;
    if g.real(p)?.shape() != target.shape() {
        return Err(Error::shape(format!(
            "overlap loss: prediction {:?} vs target {:?}",
            g.real(p)?.shape(),
            target.shape()
        )));
    }
    let t = g.input(target.clone());
    let pt = g.mul(p, t)?;
    let inter = g.sum_all(pt)?;
    let sp = g.sum_all(p)?;
    let st = g.sum_all(t)?;
    let union = g.weighted_sum(&[(sp, 1.0), (st, 1.0), (inter, -1.0)])?;
    let num = g.offset(inter, 1.0)?;
    let den = g.offset(union, 1.0)?;
    let frac = g.div(num, den)?;
    let neg = g.scale_node(frac, -1.0)?;
    g.offset(neg, 1.0)
}

/// BCE + IoU on one prediction/target pair.
fn region_loss(g: &mut Graph, p: NodeId, target: &Tensor) -> Result<NodeId> {
    let b = bce_loss(g, p, target)?;
    let i = iou_loss(g, p, target)?;
    g.add(b, i)
}

/// Co-focus frequency loss: (1/HW)·Σ w(u,v)·|FFT(ℰ − E)(u,v)|² over the full
/// spectrum, evaluated on the half spectrum with conjugate-pair weights. The
/// weight map `w` is a constant: no gradient flows into it.
pub fn cfl_loss(g: &mut Graph, e_pred: NodeId, e: &Tensor, w: &Tensor) -> Result<NodeId> {
    let (_, h, wd) = g.real(e_pred)?.dims3()?;
    if g.real(e_pred)?.shape() != e.shape() {
        return Err(Error::shape(format!(
            "frequency loss: prediction {:?} vs target {:?}",
            g.real(e_pred)?.shape(),
            e.shape()
        )));
    }
    let w2 = half_width(wd);
    if w.shape() != [h, w2] {
        return Err(Error::shape(format!(
            "frequency loss: weight map {:?} does not match half spectrum [{h}, {w2}]",
            w.shape()
        )));
    }
    if let Some(bad) = w.data().iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::contract(format!(
            "frequency loss weights must be finite and nonnegative, found {bad}"
        )));
    }
    let hermw = half_spectrum_weights(wd);
    let hw = (h * wd) as f64;
    let q = Tensor::from_fn(&[h, w2], |i| w.data()[i] * hermw[i % w2] / hw);
    let t = g.input(e.clone());
    let diff = g.sub(e_pred, t)?;
    g.weighted_spectrum_energy(diff, &q)
}

/// One co-director projection: depthwise 3×3 + pointwise to a single plane,
/// nearest-neighbor upsample to target resolution, then spectrum with its
/// amplitude flattened to the per-spectrum mean (phase kept).
fn flattened_spectrum(
    store: &ParamStore,
    feat: &Tensor,
    head: &DConv3Weights,
    out_h: usize,
) -> Result<ComplexTensor> {
    let y = nn::depthwise3(feat, store.value(head.dw), store.value(head.db))?;
    let y = nn::conv1x1(&y, store.value(head.pw), store.value(head.pb))?;
    let (c, fh, _) = y.dims3()?;
    if c != 1 {
        return Err(Error::contract(format!(
            "co-director head must project to one channel, got {c}"
        )));
    }
    if fh == 0 || out_h % fh != 0 {
        return Err(Error::shape(format!(
            "co-director feature height {fh} does not divide target {out_h}"
        )));
    }
    let up = nn::upsample(&y, out_h / fh)?;
    let pair = amp_phase(&rfft2_spatial(&up)?);
    let mean = pair.amplitude.data().iter().sum::<f64>() / pair.amplitude.numel() as f64;
    complex_from(&SpectralPair {
        amplitude: Tensor::full(pair.amplitude.shape(), mean),
        phase: pair.phase,
    })
}

/// Per-bin co-focus weights: the summed spectral distances of the two
/// modality co-directors and the edge prediction from the edge target,
/// raised to `alpha`. Exponent 0 short-circuits to a uniform map. The
/// result is used as a constant during backward.
#[allow(clippy::too_many_arguments)]
pub fn cfm_weights(
    store: &ParamStore,
    r1: &Tensor,
    t1: &Tensor,
    r_head: &DConv3Weights,
    t_head: &DConv3Weights,
    e_pred: &Tensor,
    e: &Tensor,
    alpha: f64,
) -> Result<Tensor> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::contract(format!(
            "co-focus exponent must be nonnegative, got {alpha}"
        )));
    }
    if e_pred.shape() != e.shape() {
        return Err(Error::shape(format!(
            "co-focus weights: prediction {:?} vs target {:?}",
            e_pred.shape(),
            e.shape()
        )));
    }
    let (ec, h, w) = e.dims3()?;
    if ec != 1 {
        return Err(Error::shape(format!(
            "co-focus weights need single-plane edge maps, got {ec} channels"
        )));
    }
    let w2 = half_width(w);
    if alpha == 0.0 {
        return Ok(Tensor::full(&[h, w2], 1.0));
    }

    // 1. Reference and candidate spectra, all 1 × h × w2.
    let r_spec = flattened_spectrum(store, r1, r_head, h)?;
    let t_spec = flattened_spectrum(store, t1, t_head, h)?;
    let e_spec = rfft2_spatial(e)?;
    let pred_spec = rfft2_spatial(e_pred)?;

    // 2. Summed complex distances from the target spectrum, raised to alpha.
    Ok(Tensor::from_fn(&[h, w2], |i| {
        let dist = |s: &ComplexTensor| {
            (s.re()[i] - e_spec.re()[i]).hypot(s.im()[i] - e_spec.im()[i])
        };
        (dist(&r_spec) + dist(&t_spec) + dist(&pred_spec)).powf(alpha)
    }))
}

/// Sigmoid side-output maps of the four decoder levels, upsampled to the
/// ground-truth resolution (deepest level last).
pub fn side_maps(g: &mut Graph, nodes: &ForwardNodes, w: &ModelWeights) -> Result<[NodeId; 4]> {
    let target = w.cfg.input_size;
    let mut out = [nodes.s; 4];
    for i in 0..4 {
        let logits = w.side_head(i + 1).build(g, nodes.d[i])?;
        let (_, dh, _) = g.real(logits)?.dims3()?;
        if dh == 0 || target % dh != 0 {
            return Err(Error::shape(format!(
                "side output height {dh} does not divide ground truth {target}"
            )));
        }
        let up = g.upsample(logits, target / dh)?;
        out[i] = g.sigmoid(up)?;
    }
    Ok(out)
}

/// Weighted total over already-materialized prediction maps:
/// λ₁(BCE+IoU)(s) + λ₂·Σᵢ(BCE+IoU)(mᵢ) + λ₃·BCE(ℰ) + λ₄·CFL(ℰ).
/// A zero λ masks its term exactly.
#[allow(clippy::too_many_arguments)]
pub fn total_from_maps(
    g: &mut Graph,
    s: NodeId,
    maps: &[NodeId; 4],
    e_pred: NodeId,
    cfm_w: &Tensor,
    gt: &Tensor,
    edge: &Tensor,
    lw: &LossWeights,
) -> Result<(NodeId, LossBreakdown)> {
    lw.validate()?;
    let l_s = region_loss(g, s, gt)?;
    let mut level_terms = Vec::with_capacity(4);
    for &m in maps {
        level_terms.push((region_loss(g, m, gt)?, 1.0));
    }
    let l_d = g.weighted_sum(&level_terms)?;
    let l_e = bce_loss(g, e_pred, edge)?;
    let l_cfl = cfl_loss(g, e_pred, edge, cfm_w)?;
    let [l1, l2, l3, l4] = lw.lambda;
    let total = g.weighted_sum(&[(l_s, l1), (l_d, l2), (l_e, l3), (l_cfl, l4)])?;
    let breakdown = LossBreakdown {
        saliency: g.real(l_s)?.item()?,
        levels: g.real(l_d)?.item()?,
        edge: g.real(l_e)?.item()?,
        cfl: g.real(l_cfl)?.item()?,
        total: g.real(total)?.item()?,
    };
    Ok((total, breakdown))
}

/// Full objective for one forward pass: builds the side outputs, computes
/// the co-focus weights off the tape from current values, and combines all
/// terms. `edge` is the binary edge target for `gt`.
pub fn total_loss(
    g: &mut Graph,
    nodes: &ForwardNodes,
    w: &ModelWeights,
    gt: &Tensor,
    edge: &Tensor,
    lw: &LossWeights,
) -> Result<(NodeId, LossBreakdown)> {
    lw.validate()?;
    let maps = side_maps(g, nodes, w)?;
    let cfm = if lw.lambda[3] == 0.0 {
        // Term is masked; a uniform map keeps shapes valid without the FFTs.
        let (_, h, wd) = g.real(nodes.e_pred)?.dims3()?;
        Tensor::full(&[h, half_width(wd)], 1.0)
    } else {
        cfm_weights(
            g.store(),
            g.real(nodes.r1)?,
            g.real(nodes.t1)?,
            &w.cfm_r_head,
            &w.cfm_t_head,
            g.real(nodes.e_pred)?,
            edge,
            lw.alpha,
        )?
    };
    total_from_maps(g, nodes.s, &maps, nodes.e_pred, &cfm, gt, edge, lw)
}
