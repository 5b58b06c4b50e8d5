//! Global token mixing two ways, for cost comparison: the spectral route
//! filters the FFT of a feature map (activations linear in HW), while the
//! direct route materializes the full (HW)×(HW) pairwise similarity matrix.
//! The two produce different maps — what is compared is time and activation
//! storage, which the bench verb accounts analytically so infeasible sizes
//! can be reported as skipped instead of attempted.

use crate::error::Result;
use crate::nn;
use crate::spectral::{half_width, irfft2_spatial, rfft2_spatial};
use crate::tensor::Tensor;

/// Activation footprint of one mixing op, in f64 scalars and bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixCost {
    pub elements: u64,
    pub bytes: u64,
}

impl MixCost {
    fn of_elements(elements: u64) -> MixCost {
        MixCost { elements, bytes: elements * 8 }
    }

    pub fn exceeds(&self, budget_bytes: u64) -> bool {
        self.bytes > budget_bytes
    }
}

/// The similarity matrix dominates the direct mixer: (HW)² scalars. Doubling
/// both extents multiplies this by exactly 16.
pub fn quadratic_cost(h: usize, w: usize) -> MixCost {
    let n = (h * w) as u64;
    MixCost::of_elements(n * n)
}

/// Peak live set of the spectral mixer: the input spectrum and its filtered
/// copy, each a complex half spectrum (two scalars per bin).
pub fn spectral_cost(c: usize, h: usize, w: usize) -> MixCost {
    MixCost::of_elements(4 * (c * h * half_width(w)) as u64)
}

/// Direct all-pairs mixer: positions become HW tokens of dimension C, every
/// token attends to every other through a row-softmaxed dot-product matrix.
/// Quadratic in HW by construction — this is the reference the spectral
/// route is measured against, kept deliberately naive.
pub fn quadratic_mix(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    let n = h * w;
    let scale = 1.0 / (c as f64).sqrt();
    let tok = |i: usize, ch: usize| x.data()[ch * n + i];

    // Step 1: pairwise scaled dot products, the (HW)×(HW) allocation.
    let mut scores = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let mut dot = 0.0;
            for ch in 0..c {
                dot += tok(i, ch) * tok(j, ch);
            }
            scores.data_mut()[i * n + j] = dot * scale;
        }
    }
    // Step 2: rows to attention weights.
    let attn = nn::softmax_rows(&scores)?;
    // Step 3: weighted token averages back into channel planes.
    let mut out = Tensor::zeros(&[c, h, w]);
    for i in 0..n {
        for j in 0..n {
            let a = attn.data()[i * n + j];
            for ch in 0..c {
                out.data_mut()[ch * n + i] += a * tok(j, ch);
            }
        }
    }
    Ok(out)
}

/// Spectral mixer: forward FFT, a fixed smooth low-pass gain per frequency
/// bin, inverse FFT. Every output position depends on every input position,
/// with activations linear in HW.
pub fn spectral_mix(x: &Tensor) -> Result<Tensor> {
    let (_, h, w) = x.dims3()?;
    let spec = rfft2_spatial(x)?;
    let (c, _, w2) = spec.dims3()?;
    let mut re = spec.re().to_vec();
    let mut im = spec.im().to_vec();
    for ch in 0..c {
        for ky in 0..h {
            let fy = ky.min(h - ky) as f64 / h as f64;
            for kx in 0..w2 {
                let fx = kx as f64 / w as f64;
                let gain = 1.0 / (1.0 + 4.0 * (fy * fy + fx * fx));
                let at = (ch * h + ky) * w2 + kx;
                re[at] *= gain;
                im[at] *= gain;
            }
        }
    }
    let filtered = crate::spectral::ComplexTensor::new(&[c, h, w2], re, im)?;
    irfft2_spatial(&filtered, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::rand_tensor;

    #[test]
    fn quadratic_storage_grows_exactly_sixteenfold_on_doubling() {
        for (h, w) in [(8, 8), (64, 64), (96, 128)] {
            let small = quadratic_cost(h, w);
            let big = quadratic_cost(2 * h, 2 * w);
            assert_eq!(big.elements, 16 * small.elements);
            assert_eq!(big.bytes, 16 * small.bytes);
        }
        // Spectral storage grows ~4×, never more than 5×.
        for c in [2usize, 8] {
            let ratio = spectral_cost(c, 128, 128).bytes as f64
                / spectral_cost(c, 64, 64).bytes as f64;
            assert!(ratio < 5.0, "spectral growth {ratio}");
        }
    }

    #[test]
    fn full_resolution_quadratic_matrix_exceeds_a_desk_budget() {
        // 384² positions → ~174 GB of similarity matrix; the bench must be
        // able to see that coming without allocating.
        let cost = quadratic_cost(384, 384);
        assert!(cost.exceeds(8 * 1024 * 1024 * 1024));
        assert!(!quadratic_cost(64, 64).exceeds(8 * 1024 * 1024 * 1024));
    }

    #[test]
    fn quadratic_mix_matches_a_hand_rolled_attention() {
        let x = rand_tensor(&[3, 2, 2], -1.0, 1.0, 11);
        let y = quadratic_mix(&x).unwrap();
        let (c, n) = (3, 4);
        for i in 0..n {
            // Hand attention for token i.
            let mut weights = [0.0f64; 4];
            for (j, wj) in weights.iter_mut().enumerate() {
                let mut dot = 0.0;
                for ch in 0..c {
                    dot += x.data()[ch * n + i] * x.data()[ch * n + j];
                }
                *wj = (dot / (c as f64).sqrt()).exp();
            }
            let z: f64 = weights.iter().sum();
            for ch in 0..c {
                let want: f64 =
                    (0..n).map(|j| weights[j] / z * x.data()[ch * n + j]).sum();
                assert!((y.data()[ch * n + i] - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn both_mixers_fix_constant_maps() {
        let x = Tensor::full(&[2, 4, 4], 0.7);
        let q = quadratic_mix(&x).unwrap();
        assert!(q.max_abs_diff(&x) <= 1e-12);
        // The spectral gain is 1 at DC, so constants pass through untouched.
        let s = spectral_mix(&x).unwrap();
        assert!(s.max_abs_diff(&x) <= 1e-12);
    }

    #[test]
    fn spectral_mix_is_linear_and_shape_preserving() {
        let a = rand_tensor(&[2, 6, 10], -1.0, 1.0, 3);
        let b = rand_tensor(&[2, 6, 10], -1.0, 1.0, 4);
        let lhs = spectral_mix(&a.scale(2.0).add(&b).unwrap()).unwrap();
        let rhs = spectral_mix(&a).unwrap().scale(2.0).add(&spectral_mix(&b).unwrap()).unwrap();
        assert_eq!(lhs.shape(), &[2, 6, 10]);
        assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }
}
