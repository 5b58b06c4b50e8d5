//! Bimodal fusion attention. Each modality's features are lifted to the
//! spatial half-spectrum, their amplitudes re-embedded through a second FFT
//! along the channel axis, their phases enhanced pointwise, and the summed
//! spectra shaped by a dynamic per-channel filter mixed from a learnable
//! bank before returning to the spatial domain.

use super::{Clc1Weights, DConv3Weights, MlpWeights, NormAffine, StarReluWeights, WeightInit};
use crate::autodiff::{Graph, NodeId, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::spectral::half_width;
use crate::tensor::Tensor;

/// CLC₁ stacks applied to the channel-spectrum amplitude and phase of an
/// amplitude tensor. Both operate on ⌊C/2⌋+1 channel-frequency bins.
#[derive(Debug, Clone, Copy)]
pub struct ChannelEnhanceWeights {
    pub amp_clc: Clc1Weights,
    pub phase_clc: Clc1Weights,
}

impl ChannelEnhanceWeights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        let c2 = half_width(c);
        Ok(ChannelEnhanceWeights {
            amp_clc: Clc1Weights::register(store, &format!("{prefix}.amp"), c2, c2, c2, init)?,
            phase_clc: Clc1Weights::register(store, &format!("{prefix}.phase"), c2, c2, c2, init)?,
        })
    }
}

/// N learnable complex spectral filters plus the MLP that scores them per
/// channel. Mixture weights are a per-channel softmax over the N scores.
#[derive(Debug, Clone, Copy)]
pub struct DynamicFilterBank {
    pub filters_re: ParamId,
    pub filters_im: ParamId,
    pub mlp: MlpWeights,
    pub n_filters: usize,
}

impl DynamicFilterBank {
    /// Filters start near identity: real part 1, imaginary part 0, both
    /// with N(0, 0.02) noise.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c: usize,
        n_filters: usize,
        h: usize,
        w: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        let w2 = half_width(w);
        Ok(DynamicFilterBank {
            filters_re: store.register(
                format!("{prefix}.re"),
                init.normal(&[n_filters, h, w2], 1.0, 0.02),
            )?,
            filters_im: store.register(
                format!("{prefix}.im"),
                init.normal(&[n_filters, h, w2], 0.0, 0.02),
            )?,
            mlp: MlpWeights::register(store, &format!("{prefix}.mlp"), c, n_filters * c, init)?,
            n_filters,
        })
    }
}

/// Per-modality branch: pointwise embedding, StarReLU, channel enhancement
/// for the amplitude, and a CLC₁ for the spatial phase.
#[derive(Debug, Clone, Copy)]
pub struct MpaBranchWeights {
    pub conv_w: ParamId,
    pub conv_b: ParamId,
    pub star: StarReluWeights,
    pub enhance: ChannelEnhanceWeights,
    pub phase_clc: Clc1Weights,
}

impl MpaBranchWeights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        Ok(MpaBranchWeights {
            conv_w: store.register(format!("{prefix}.conv.w"), init.kaiming(&[c, c], c))?,
            conv_b: store.register(format!("{prefix}.conv.b"), Tensor::zeros(&[c]))?,
            star: StarReluWeights::register(store, &format!("{prefix}.star"))?,
            enhance: ChannelEnhanceWeights::register(store, &format!("{prefix}.enhance"), c, init)?,
            phase_clc: Clc1Weights::register(store, &format!("{prefix}.sphase"), c, c, c, init)?,
        })
    }
}

/// Full fusion-attention weight set for one encoder level.
pub struct MpaWeights {
    pub norm_r: NormAffine,
    pub norm_t: NormAffine,
    pub branch_r: MpaBranchWeights,
    pub branch_t: MpaBranchWeights,
    pub bank: DynamicFilterBank,
    pub norm_f: NormAffine,
    pub ffn: DConv3Weights,
}

impl MpaWeights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c: usize,
        n_filters: usize,
        h: usize,
        w: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        Ok(MpaWeights {
            norm_r: NormAffine::register(store, &format!("{prefix}.norm_r"), c)?,
            norm_t: NormAffine::register(store, &format!("{prefix}.norm_t"), c)?,
            branch_r: MpaBranchWeights::register(store, &format!("{prefix}.r"), c, init)?,
            branch_t: MpaBranchWeights::register(store, &format!("{prefix}.t"), c, init)?,
            bank: DynamicFilterBank::register(store, &format!("{prefix}.bank"), c, n_filters, h, w, init)?,
            norm_f: NormAffine::register(store, &format!("{prefix}.norm_f"), c)?,
            ffn: DConv3Weights::register(store, &format!("{prefix}.ffn"), c, c, init)?,
        })
    }
}

/// Re-embeds an amplitude tensor through the channel dimension: channel
/// FFT, CLC₁ on the channel-amplitude and channel-phase, inverse channel
/// FFT. The caller gates the original amplitude with the result.
///
/// The input must be a genuine amplitude (every entry ≥ 0).
pub fn channel_enhance(g: &mut Graph, a: NodeId, w: &ChannelEnhanceWeights) -> Result<NodeId> {
    let av = g.value(a).as_real()?;
    if let Some(bad) = av.data().iter().find(|v| **v < 0.0) {
        return Err(Error::domain(format!(
            "channel_enhance expects a nonnegative amplitude tensor, found {bad}"
        )));
    }
    let c = av.shape()[0];
    let spec = g.rfft_ch(a)?;
    let ca = g.amp(spec)?;
    let cp = g.phase(spec)?;
    let ca = w.amp_clc.build(g, ca)?;
    let cp = w.phase_clc.build(g, cp)?;
    let enhanced = g.polar(ca, cp)?;
    g.irfft_ch(enhanced, c)
}

/// Mixture coefficients: spatial mean of the summed descriptor → MLP →
/// per-channel softmax rows. Score (j·N + n) belongs to channel j, filter n.
pub(crate) fn filter_coeffs(g: &mut Graph, src: NodeId, bank: &DynamicFilterBank) -> Result<NodeId> {
    let (c, _, _) = g.value(src).as_real()?.dims3()?;
    let pooled = g.gap(src)?;
    let pooled = g.reshape(pooled, &[c])?;
    let scores = bank.mlp.build(g, pooled)?;
    let mat = g.reshape(scores, &[c, bank.n_filters])?;
    g.softmax_rows(mat)
}

pub(crate) fn dynamic_filter_from(g: &mut Graph, src: NodeId, bank: &DynamicFilterBank) -> Result<NodeId> {
    let coeffs = filter_coeffs(g, src, bank)?;
    let re = g.param(bank.filters_re);
    let im = g.param(bank.filters_im);
    let filters = g.complex_join(re, im)?;
    g.mix_filters(coeffs, filters)
}

/// Per-channel spectral filter predicted from both normalized modalities.
pub fn dynamic_filter(
    g: &mut Graph,
    r_norm: NodeId,
    t_norm: NodeId,
    bank: &DynamicFilterBank,
) -> Result<NodeId> {
    if g.value(r_norm).shape() != g.value(t_norm).shape() {
        return Err(Error::shape(format!(
            "dynamic_filter: modality shapes differ ({:?} vs {:?})",
            g.value(r_norm).shape(),
            g.value(t_norm).shape()
        )));
    }
    let src = g.add(r_norm, t_norm)?;
    dynamic_filter_from(g, src, bank)
}

/// One modality's re-embedded half-spectrum: pointwise conv → StarReLU →
/// rFFT, amplitude gated by its channel enhancement, phase through a CLC₁.
pub(crate) fn branch_spectrum(g: &mut Graph, x: NodeId, b: &MpaBranchWeights) -> Result<NodeId> {
    let w = g.param(b.conv_w);
    let bias = g.param(b.conv_b);
    let y = g.conv1x1(x, w, bias)?;
    let y = b.star.build(g, y)?;
    let spec = g.rfft2(y)?;
    let a = g.amp(spec)?;
    let p = g.phase(spec)?;
    let a_enh = channel_enhance(g, a, &b.enhance)?;
    let a_gated = g.mul(a, a_enh)?;
    let p_enh = b.phase_clc.build(g, p)?;
    g.polar(a_gated, p_enh)
}

/// Fusion filter: both branch spectra summed, multiplied by the dynamic
/// filter, and returned to the spatial domain.
pub fn mpf(g: &mut Graph, r_norm: NodeId, t_norm: NodeId, w: &MpaWeights) -> Result<NodeId> {
    let (_, _, width) = g.value(r_norm).as_real()?.dims3()?;
    if g.value(r_norm).shape() != g.value(t_norm).shape() {
        return Err(Error::shape(format!(
            "mpf: modality shapes differ ({:?} vs {:?})",
            g.value(r_norm).shape(),
            g.value(t_norm).shape()
        )));
    }
    let xr = branch_spectrum(g, r_norm, &w.branch_r)?;
    let xt = branch_spectrum(g, t_norm, &w.branch_t)?;
    let fused = g.cadd(xr, xt)?;
    let df = dynamic_filter(g, r_norm, t_norm, &w.bank)?;
    let shaped = g.cmul(fused, df)?;
    g.irfft2(shaped, width)
}

/// Full fusion block: f = DConv₃(Norm(MPF(Norm r, Norm t) + r + t)) +
/// (MPF(Norm r, Norm t) + r + t).
pub fn mpa(g: &mut Graph, r: NodeId, t: NodeId, w: &MpaWeights) -> Result<NodeId> {
    if g.value(r).shape() != g.value(t).shape() {
        return Err(Error::shape(format!(
            "mpa: modality shapes differ ({:?} vs {:?})",
            g.value(r).shape(),
            g.value(t).shape()
        )));
    }
    let rn = w.norm_r.build(g, r)?;
    let tn = w.norm_t.build(g, t)?;
    let fused = mpf(g, rn, tn, w)?;
    let s = g.add(fused, r)?;
    let s = g.add(s, t)?;
    let sn = w.norm_f.build(g, s)?;
    let ffn = w.ffn.build(g, sn)?;
    g.add(ffn, s)
}
