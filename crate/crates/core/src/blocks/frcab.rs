//! Fourier residual channel attention. A CLC₃ stack refines the input, the
//! refined map's channel descriptor is transformed along the channel axis,
//! gated in amplitude and phase, and returned as per-channel attention
//! weights; a residual add and a DConv-Norm-ReLU-Upsample compound follow.

use super::{Clc1Weights, Clc3Weights, DnruWeights, WeightInit};
use crate::autodiff::{Graph, NodeId, ParamStore};
use crate::error::Result;
use crate::spectral::half_width;

/// Weight set for one attention block: the refining CLC₃, the two gate
/// stacks acting on the pooled descriptor, and the output compound.
pub struct FrcabWeights {
    pub clc3: Clc3Weights,
    pub amp_gate: Clc1Weights,
    pub phase_gate: Clc1Weights,
    pub dnru: DnruWeights,
}

impl FrcabWeights {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c: usize,
        c_out: usize,
        init: &mut WeightInit,
    ) -> Result<Self> {
        let c2 = half_width(c);
        Ok(FrcabWeights {
            clc3: Clc3Weights::register(store, &format!("{prefix}.clc3"), c, init)?,
            amp_gate: Clc1Weights::register(store, &format!("{prefix}.agate"), c, c, c2, init)?,
            phase_gate: Clc1Weights::register(store, &format!("{prefix}.pgate"), c, c, c2, init)?,
            dnru: DnruWeights::register(store, &format!("{prefix}.dnru"), c, c_out, init)?,
        })
    }
}

/// Channel spectrum of the pooled descriptor with its amplitude and phase
/// each scaled by a gate computed from the same descriptor.
pub(crate) fn gated_channel_spectrum(
    g: &mut Graph,
    pooled: NodeId,
    w: &FrcabWeights,
) -> Result<NodeId> {
    let spec = g.rfft_ch(pooled)?;
    let a = g.amp(spec)?;
    let p = g.phase(spec)?;
    let ga = w.amp_gate.build(g, pooled)?;
    let gp = w.phase_gate.build(g, pooled)?;
    let a2 = g.mul(a, ga)?;
    let p2 = g.mul(p, gp)?;
    g.polar(a2, p2)
}

/// Attention body without the output compound: x + CLC₃(x) ⊙ att, where
/// att is one weight per channel recovered from the gated spectrum of the
/// pooled CLC₃ response.
pub fn frcab_attend(g: &mut Graph, x: NodeId, w: &FrcabWeights) -> Result<NodeId> {
    let (c, _, _) = g.value(x).as_real()?.dims3()?;
    let base = w.clc3.build(g, x)?;
    let pooled = g.gap(base)?;
    let spec = gated_channel_spectrum(g, pooled, w)?;
    let att = g.irfft_ch(spec, c)?;
    let scaled = g.mul(base, att)?;
    g.add(scaled, x)
}

/// Full block: attention body followed by DConv₃ → Norm → ReLU → UP.
/// `factor` is 2 in the decoder and 1 where resolution must be kept.
pub fn frcab(g: &mut Graph, x: NodeId, w: &FrcabWeights, factor: usize) -> Result<NodeId> {
    let att = frcab_attend(g, x, w)?;
    w.dnru.build(g, att, factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckOptions, ParamStore};
    use crate::blocks::LEAKY_SLOPE;
    use crate::nn;
    use crate::spectral;
    use crate::tensor::Tensor;
    use crate::testutil::{jitter_params, naive_irfft_channel, rand_tensor, set_param};

    fn clc3_pure(x: &Tensor, store: &ParamStore, w: &Clc3Weights) -> Tensor {
        let h = nn::conv2d(x, store.value(w.w1), store.value(w.b1), 1, 1).unwrap();
        let h = nn::leaky_relu(&h, LEAKY_SLOPE);
        nn::conv2d(&h, store.value(w.w2), store.value(w.b2), 1, 1).unwrap()
    }

    #[test]
    fn zeroed_refinement_makes_the_attention_body_an_identity() {
        let mut store = ParamStore::new();
        let mut init = WeightInit::new(3);
        let w = FrcabWeights::register(&mut store, "frcab", 4, 4, &mut init).unwrap();
        set_param(&mut store, w.clc3.w2, Tensor::zeros(&[4, 4, 3, 3]));
        let x = rand_tensor(&[4, 5, 5], -1.0, 1.0, 4);
        let mut g = Graph::new(&store);
        let xn = g.input(x.clone());
        let y = frcab_attend(&mut g, xn, &w).unwrap();
        assert!(g.value(y).as_real().unwrap().max_abs_diff(&x) <= 1e-15);
    }

    #[test]
    fn output_shapes_follow_the_upsample_factor() {
        let mut store = ParamStore::new();
        let mut init = WeightInit::new(5);
        let w = FrcabWeights::register(&mut store, "frcab", 4, 3, &mut init).unwrap();
        let mut g = Graph::new(&store);
        let xn = g.input(rand_tensor(&[4, 4, 6], -1.0, 1.0, 6));
        let y2 = frcab(&mut g, xn, &w, 2).unwrap();
        assert_eq!(g.value(y2).shape(), &[3, 8, 12]);
        let y1 = frcab(&mut g, xn, &w, 1).unwrap();
        assert_eq!(g.value(y1).shape(), &[3, 4, 6]);
    }

    #[test]
    fn attention_scales_each_channel_uniformly() {
        // pre − x = CLC₃(x) ⊙ att with att constant per channel, so the
        // ratio (pre − x) / CLC₃(x) is channel-wise constant wherever the
        // refined map is away from zero.
        let mut store = ParamStore::new();
        let mut init = WeightInit::new(7);
        let w = FrcabWeights::register(&mut store, "frcab", 4, 4, &mut init).unwrap();
        let x = rand_tensor(&[4, 6, 6], -1.0, 1.0, 8);
        let base = clc3_pure(&x, &store, &w.clc3);
        let mut g = Graph::new(&store);
        let xn = g.input(x.clone());
        let y = frcab_attend(&mut g, xn, &w).unwrap();
        let pre = g.value(y).as_real().unwrap();
        for c in 0..4 {
            let mut ratio: Option<f64> = None;
            for p in 0..36 {
                let b = base.data()[c * 36 + p];
                if b.abs() < 1e-6 {
                    continue;
                }
                let r = (pre.data()[c * 36 + p] - x.data()[c * 36 + p]) / b;
                match ratio {
                    None => ratio = Some(r),
                    Some(r0) => assert!((r - r0).abs() <= 1e-9, "channel {c}: {r} vs {r0}"),
                }
            }
            assert!(ratio.is_some(), "channel {c} had no usable positions");
        }
    }

    #[test]
    fn gated_channel_spectrum_inverts_without_imaginary_leakage() {
        let mut store = ParamStore::new();
        let mut init = WeightInit::new(9);
        let w = FrcabWeights::register(&mut store, "frcab", 6, 6, &mut init).unwrap();
        let x = rand_tensor(&[6, 4, 4], -1.0, 1.0, 10);
        let mut g = Graph::new(&store);
        let xn = g.input(x);
        let base = w.clc3.build(&mut g, xn).unwrap();
        let pooled = g.gap(base).unwrap();
        let spec = gated_channel_spectrum(&mut g, pooled, &w).unwrap();
        let att = g.irfft_ch(spec, 6).unwrap();
        let (naive, leak) =
            naive_irfft_channel(g.value(spec).as_complex().unwrap(), 6, true);
        assert!(leak <= 1e-10, "projected inverse leaks {leak}");
        assert!(g.value(att).as_real().unwrap().max_abs_diff(&naive) <= 1e-10);
        // The ungated pooled spectrum is Hermitian already.
        let plain = spectral::rfft_channel(g.value(pooled).as_real().unwrap()).unwrap();
        let (_, raw_leak) = naive_irfft_channel(&plain, 6, false);
        assert!(raw_leak <= 1e-10, "rfft_ch spectrum leaks {raw_leak}");
    }

    #[test]
    fn frcab_gradients_match_finite_differences() {
        for seed in 0..20u64 {
            let mut store = ParamStore::new();
            let mut init = WeightInit::new(30 + seed);
            let w = FrcabWeights::register(&mut store, "frcab", 4, 3, &mut init).unwrap();
            jitter_params(&mut store, 0.05, 500 + seed);
            let mut inputs = vec![
                rand_tensor(&[4, 4, 4], -1.0, 1.0, 60 + seed),
                rand_tensor(&[3, 8, 8], -1.0, 1.0, 90 + seed),
            ];
            let opts = GradCheckOptions { max_coords: 4, seed, ..GradCheckOptions::default() };
            let report = grad_check(
                &mut store,
                &mut inputs,
                &|g, ins| {
                    let y = frcab(g, ins[0], &w, 2)?;
                    let masked = g.mul(y, ins[1])?;
                    g.sum_all(masked)
                },
                &opts,
            )
            .unwrap();
            assert!(report.max_rel <= 1e-4, "seed {seed}: rel err {}", report.max_rel);
        }
    }
}
