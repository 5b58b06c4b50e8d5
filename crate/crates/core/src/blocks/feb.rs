//! Frequency edge extraction. Phase-enhancement projections recombine each
//! modality's spectrum with a refined phase, the summed spectrum passes a
//! learnable high-pass mask (clamped to [0,1]), and the spatial edge map is
//! refined by channel attention. A fusion compound merges the two edge
//! levels into one.

use super::frcab::{frcab, FrcabWeights};
use super::{Clc1Weights, DnruWeights, WeightInit};
use crate::autodiff::{Graph, NodeId, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::spectral::half_width;
use crate::tensor::Tensor;

/// Radial high-pass profile used to initialize the learnable mask:
/// 1 − exp(−(ρ/σ)²) over normalized frequency radius ρ ∈ [0, √2].
/// The DC bin starts at exactly zero; the corner bin is essentially one.
pub fn initial_mask(h: usize, w: usize, sigma: f64) -> Tensor {
    let w2 = half_width(w);
    Tensor::from_fn(&[h, w2], |i| {
        let (u, v) = (i / w2, i % w2);
        let fu = u.min(h - u) as f64 / (h as f64 / 2.0);
        let fv = v as f64 / (w as f64 / 2.0);
        let rho = fu.hypot(fv);
        1.0 - (-(rho / sigma) * (rho / sigma)).exp()
    })
}

/// Learnable spectral mask, one weight per half-spectrum bin. Values are
/// clamped to [0,1] at use, so optimization cannot amplify a band.
#[derive(Debug, Clone, Copy)]
pub struct HighPassFilter {
    pub mask: ParamId,
}

impl HighPassFilter {
    pub const DEFAULT_SIGMA: f64 = 0.1;

    pub fn register(store: &mut ParamStore, prefix: &str, h: usize, w: usize) -> Result<Self> {
        Ok(HighPassFilter {
            mask: store.register(
                format!("{prefix}.mask"),
                initial_mask(h, w, Self::DEFAULT_SIGMA),
            )?,
        })
    }

    /// The mask as a graph node, clamped to [0,1].
    pub fn build(&self, g: &mut Graph) -> Result<NodeId> {
        let m = g.param(self.mask);
        g.clamp01(m)
    }
}

/// Phase-enhancement projection: keep the spectrum's amplitude, refine its
/// phase with a CLC₁, and recombine.
#[derive(Debug, Clone, Copy)]
pub struct PepWeights {
    pub phase_clc: Clc1Weights,
}

impl PepWeights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        Ok(PepWeights {
            phase_clc: Clc1Weights::register(store, &format!("{prefix}.phase"), c, c, c, init)?,
        })
    }
}

/// |FFT(x)| · e^{i·CLC₁(∠FFT(x))} as a half-spectrum node.
pub fn pep(g: &mut Graph, x: NodeId, w: &PepWeights) -> Result<NodeId> {
    let spec = g.rfft2(x)?;
    let a = g.amp(spec)?;
    let p = g.phase(spec)?;
    let p2 = w.phase_clc.build(g, p)?;
    g.polar(a, p2)
}

/// Edge-extraction weights for one encoder level: one projection per
/// modality, the high-pass mask, and the output attention block.
pub struct EfebWeights {
    pub pep_t: PepWeights,
    pub pep_f: PepWeights,
    pub hf: HighPassFilter,
    pub frcab: FrcabWeights,
}

impl EfebWeights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c: usize,
        c_edge: usize,
        h: usize,
        w: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        Ok(EfebWeights {
            pep_t: PepWeights::register(store, &format!("{prefix}.pep_t"), c, init)?,
            pep_f: PepWeights::register(store, &format!("{prefix}.pep_f"), c, init)?,
            hf: HighPassFilter::register(store, &format!("{prefix}.hf"), h, w)?,
            frcab: FrcabWeights::register(store, &format!("{prefix}.frcab"), c, c_edge, init)?,
        })
    }
}

/// High-pass-filtered sum of both projected spectra, back in the spatial
/// domain: ẽ = FFT⁻¹(mask ⊙ (PEP(t) + PEP(f))).
pub fn efeb_filtered(g: &mut Graph, t: NodeId, f: NodeId, w: &EfebWeights) -> Result<NodeId> {
    if g.value(t).shape() != g.value(f).shape() {
        return Err(Error::shape(format!(
            "efeb: modality shapes differ ({:?} vs {:?})",
            g.value(t).shape(),
            g.value(f).shape()
        )));
    }
    let (_, _, width) = g.value(t).as_real()?.dims3()?;
    let st = pep(g, t, &w.pep_t)?;
    let sf = pep(g, f, &w.pep_f)?;
    let summed = g.cadd(st, sf)?;
    let mask = w.hf.build(g)?;
    let filtered = g.cmul_mask(summed, mask)?;
    g.irfft2(filtered, width)
}

/// Full edge block: ẽ is merged back with the fused feature and refined by
/// channel attention at the same resolution.
pub fn efeb(g: &mut Graph, t: NodeId, f: NodeId, w: &EfebWeights) -> Result<NodeId> {
    let filtered = efeb_filtered(g, t, f, w)?;
    let merged = g.add(filtered, f)?;
    frcab(g, merged, &w.frcab, 1)
}

/// Merges the two edge levels: e₂ (half resolution) is upsampled, stacked
/// with e₁, and fused by a DConv-Norm-ReLU-UP₂ compound.
pub fn feb(g: &mut Graph, e1: NodeId, e2: NodeId, w: &DnruWeights) -> Result<NodeId> {
    let (c1, h1, w1) = g.value(e1).as_real()?.dims3()?;
    let (c2, h2, w2) = g.value(e2).as_real()?.dims3()?;
    if c1 != c2 || h2 * 2 != h1 || w2 * 2 != w1 {
        return Err(Error::shape(format!(
            "feb expects the second level at half resolution with matching channels, \
             got [{c1}, {h1}, {w1}] and [{c2}, {h2}, {w2}]"
        )));
    }
    let up = g.upsample(e2, 2)?;
    let stacked = g.concat(&[e1, up])?;
    w.build(g, stacked, 2)
}
