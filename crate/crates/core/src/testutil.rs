//! Helpers shared by unit tests across modules: deterministic random
//! tensors, identity configurations for learnable blocks, and naive
//! full-spectrum inverse transforms used to measure imaginary leakage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamId, ParamStore};
use crate::blocks::Clc1Weights;
use crate::spectral::ComplexTensor;
use crate::tensor::Tensor;

pub(crate) fn rand_tensor(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Overwrites a parameter's value, keeping its shape.
pub(crate) fn set_param(store: &mut ParamStore, id: ParamId, t: Tensor) {
    assert_eq!(store.value(id).shape(), t.shape(), "set_param must keep shape");
    *store.value_mut(id) = t;
}

/// Adds uniform noise to every parameter so finite differences probe a
/// generic point. Freshly registered stacks put zero-initialized biases
/// exactly on activation kinks (phases of real spectrum bins are exactly
/// 0 or π), where central differences measure an average of both slopes.
pub(crate) fn jitter_params(store: &mut ParamStore, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let noisy = {
            let t = store.value(id);
            Tensor::from_fn(t.shape(), |i| t.data()[i] + rng.random_range(-scale..scale))
        };
        *store.value_mut(id) = noisy;
    }
}

/// Identity matrix as a pointwise-convolution kernel.
pub(crate) fn eye_conv1(c: usize) -> Tensor {
    Tensor::from_fn(&[c, c], |i| if i / c == i % c { 1.0 } else { 0.0 })
}

/// Centered-delta diagonal kernel: a 3×3 convolution that copies its input.
pub(crate) fn eye_conv3(c: usize) -> Tensor {
    Tensor::from_fn(&[c, c, 3, 3], |i| {
        let kw = i % 3;
        let kh = (i / 3) % 3;
        let cin = (i / 9) % c;
        let cout = i / (9 * c);
        if cout == cin && kh == 1 && kw == 1 { 1.0 } else { 0.0 }
    })
}

/// Configures a square CLC₁ stack as an exact identity on inputs ≥ −shift:
/// the first conv adds `shift`, lifting values into LeakyReLU's linear
/// region, and the second conv subtracts it again.
pub(crate) fn identity_clc1(store: &mut ParamStore, w: &Clc1Weights, shift: f64) {
    let c = store.value(w.b1).numel();
    assert_eq!(store.value(w.b2).numel(), c, "identity_clc1 needs a square stack");
    set_param(store, w.w1, eye_conv1(c));
    set_param(store, w.b1, Tensor::full(&[c], shift));
    set_param(store, w.w2, eye_conv1(c));
    set_param(store, w.b2, Tensor::full(&[c], -shift));
}

/// Naive inverse of a spatial half-spectrum via the full W-wide grid:
/// Hermitian-widens the last axis, optionally symmetrizes the
/// self-conjugate columns (the orthogonal projection onto spectra of real
/// signals), then runs the O(n²) inverse sums. Returns the real part and
/// the largest imaginary residue. With `project` the residue must be
/// roundoff-sized; without it, the residue measures how far the spectrum
/// strays from Hermitian symmetry.
pub(crate) fn naive_irfft2(x: &ComplexTensor, out_width: usize, project: bool) -> (Tensor, f64) {
    let (c, h, w2) = x.dims3().unwrap();
    let w = out_width;
    assert_eq!(w / 2 + 1, w2, "out_width inconsistent with half spectrum");
    let mut full = vec![(0.0f64, 0.0f64); c * h * w];
    let at = |ch: usize, u: usize, v: usize| -> (f64, f64) {
        let i = (ch * h + u) * w2 + v;
        (x.re()[i], x.im()[i])
    };
    for ch in 0..c {
        for u in 0..h {
            for v in 0..w {
                full[(ch * h + u) * w + v] = if v < w2 {
                    at(ch, u, v)
                } else {
                    let (re, im) = at(ch, (h - u) % h, w - v);
                    (re, -im)
                };
            }
        }
    }
    // Step 2: optionally project the self-conjugate columns (v = 0 and
    // v = W/2 when W is even) so the spectrum is exactly Hermitian.
    if project {
        let mut self_cols = vec![0usize];
        if w % 2 == 0 && w > 1 {
            self_cols.push(w / 2);
        }
        for ch in 0..c {
            for &v in &self_cols {
                let col: Vec<(f64, f64)> =
                    (0..h).map(|u| full[(ch * h + u) * w + v]).collect();
                for u in 0..h {
                    let (a, b) = col[u];
                    let (a2, b2) = col[(h - u) % h];
                    full[(ch * h + u) * w + v] = ((a + a2) / 2.0, (b - b2) / 2.0);
                }
            }
        }
    }
    // Step 3: full complex inverse DFT.
    let mut out = Tensor::zeros(&[c, h, w]);
    let mut max_im: f64 = 0.0;
    for ch in 0..c {
        for a in 0..h {
            for b in 0..w {
                let (mut sre, mut sim) = (0.0, 0.0);
                for u in 0..h {
                    for v in 0..w {
                        let ang = 2.0 * std::f64::consts::PI
                            * (u as f64 * a as f64 / h as f64 + v as f64 * b as f64 / w as f64);
                        let (fre, fim) = full[(ch * h + u) * w + v];
                        sre += fre * ang.cos() - fim * ang.sin();
                        sim += fre * ang.sin() + fim * ang.cos();
                    }
                }
                let n = (h * w) as f64;
                out.data_mut()[(ch * h + a) * w + b] = sre / n;
                max_im = max_im.max((sim / n).abs());
            }
        }
    }
    (out, max_im)
}

/// Channel-axis analogue of `naive_irfft2`.
pub(crate) fn naive_irfft_channel(x: &ComplexTensor, out_channels: usize, project: bool) -> (Tensor, f64) {
    let (c2, h, w) = x.dims3().unwrap();
    let c = out_channels;
    assert_eq!(c / 2 + 1, c2, "out_channels inconsistent with half spectrum");
    let hw = h * w;
    let mut full = vec![(0.0f64, 0.0f64); c * hw];
    for ch in 0..c {
        for p in 0..hw {
            full[ch * hw + p] = if ch < c2 {
                (x.re()[ch * hw + p], x.im()[ch * hw + p])
            } else {
                (x.re()[(c - ch) * hw + p], -x.im()[(c - ch) * hw + p])
            };
        }
    }
    // Self-conjugate bins on the channel axis pair with themselves: project
    // them to their real part.
    if project {
        let mut self_bins = vec![0usize];
        if c % 2 == 0 && c > 1 {
            self_bins.push(c / 2);
        }
        for &ch in &self_bins {
            for p in 0..hw {
                full[ch * hw + p].1 = 0.0;
            }
        }
    }
    let mut out = Tensor::zeros(&[c, h, w]);
    let mut max_im: f64 = 0.0;
    for ch in 0..c {
        for p in 0..hw {
            let (mut sre, mut sim) = (0.0, 0.0);
            for q in 0..c {
                let ang = 2.0 * std::f64::consts::PI * (q as f64 * ch as f64 / c as f64);
                let (fre, fim) = full[q * hw + p];
                sre += fre * ang.cos() - fim * ang.sin();
                sim += fre * ang.sin() + fim * ang.cos();
            }
            out.data_mut()[ch * hw + p] = sre / c as f64;
            max_im = max_im.max((sim / c as f64).abs());
        }
    }
    (out, max_im)
}
