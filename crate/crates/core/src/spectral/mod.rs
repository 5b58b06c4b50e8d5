//! Spectral transforms over rank-3 tensors: half-spectrum 2-D FFTs across
//! the spatial axes, 1-D FFTs along the channel axis, and amplitude/phase
//! (de)composition.
//!
//! Forward transforms of real input keep `n/2 + 1` bins along the last
//! transformed axis; the inverses take the intended full extent explicitly
//! because an even and an odd extent can share a half-spectrum width.
//! Forward passes are unnormalized, inverses divide by the product of the
//! transformed extents.

mod fft;
pub mod oracle;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use fft::{fft, plan_for, C64};

/// Complex tensor stored as separate real and imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexTensor {
    pub fn new(shape: &[usize], re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("zero extent in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if re.len() != n || im.len() != n {
            return Err(Error::shape(format!(
                "shape {shape:?} wants {n} elements, got re={} im={}",
                re.len(),
                im.len()
            )));
        }
        Ok(ComplexTensor { shape: shape.to_vec(), re, im })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        ComplexTensor { shape: shape.to_vec(), re: vec![0.0; n], im: vec![0.0; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.re.len()
    }

    /// Interprets the tensor as C×H×W.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::shape(format!("expected rank-3 tensor, got {:?}", self.shape))),
        }
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub(crate) fn re_mut(&mut self) -> &mut [f64] {
        &mut self.re
    }

    pub(crate) fn im_mut(&mut self) -> &mut [f64] {
        &mut self.im
    }

    pub fn re_tensor(&self) -> Tensor {
        Tensor::new(&self.shape, self.re.clone()).expect("re plane matches shape")
    }

    pub fn im_tensor(&self) -> Tensor {
        Tensor::new(&self.shape, self.im.clone()).expect("im plane matches shape")
    }

    pub fn add(&self, rhs: &ComplexTensor) -> Result<ComplexTensor> {
        if self.shape != rhs.shape {
            return Err(Error::shape(format!("add {:?} vs {:?}", self.shape, rhs.shape)));
        }
        let re = self.re.iter().zip(&rhs.re).map(|(a, b)| a + b).collect();
        let im = self.im.iter().zip(&rhs.im).map(|(a, b)| a + b).collect();
        Ok(ComplexTensor { shape: self.shape.clone(), re, im })
    }

    pub fn scale(&self, s: f64) -> ComplexTensor {
        ComplexTensor {
            shape: self.shape.clone(),
            re: self.re.iter().map(|v| v * s).collect(),
            im: self.im.iter().map(|v| v * s).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    /// Max absolute difference over both planes, same shape required.
    pub fn max_abs_diff(&self, other: &ComplexTensor) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.re
            .iter()
            .zip(&other.re)
            .chain(self.im.iter().zip(&other.im))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Amplitude and phase planes of a spectrum, same shape as its source.
#[derive(Debug, Clone)]
pub struct SpectralPair {
    pub amplitude: Tensor,
    pub phase: Tensor,
}

/// Half-spectrum width along an axis of full extent `n`.
pub fn half_width(n: usize) -> usize {
    n / 2 + 1
}

/// Per-bin conjugate-pair multiplicity for a half spectrum of full extent
/// `n`: 1 for the self-conjugate bins (DC, and Nyquist when `n` is even),
/// 2 for every bin whose mirror was dropped.
pub fn half_spectrum_weights(n: usize) -> Vec<f64> {
    (0..half_width(n))
        .map(|k| if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 })
        .collect()
}

/// 2-D FFT over the spatial axes of a C×H×W tensor, keeping W/2+1 columns.
pub fn rfft2_spatial(x: &Tensor) -> Result<ComplexTensor> {
    let (c, h, w) = x.dims3()?;
    let w2 = half_width(w);
    let plan_w = plan_for(w);
    let plan_h = plan_for(h);
    let mut out = ComplexTensor::zeros(&[c, h, w2]);
    let mut line = vec![C64::ZERO; w.max(h)];
    let mut spec = vec![C64::ZERO; w.max(h)];
    let src = x.data();
    for ci in 0..c {
        // Step 1: real-to-complex rows, dropping the conjugate-mirrored bins.
        for hi in 0..h {
            let base = (ci * h + hi) * w;
            for wi in 0..w {
                line[wi] = C64::new(src[base + wi], 0.0);
            }
            fft(&plan_w, &line[..w], &mut spec[..w], false);
            let obase = (ci * h + hi) * w2;
            for vi in 0..w2 {
                out.re[obase + vi] = spec[vi].re;
                out.im[obase + vi] = spec[vi].im;
            }
        }
        // Step 2: full complex transform down each retained column.
        for vi in 0..w2 {
            for hi in 0..h {
                let ix = (ci * h + hi) * w2 + vi;
                line[hi] = C64::new(out.re[ix], out.im[ix]);
            }
            fft(&plan_h, &line[..h], &mut spec[..h], false);
            for hi in 0..h {
                let ix = (ci * h + hi) * w2 + vi;
                out.re[ix] = spec[hi].re;
                out.im[ix] = spec[hi].im;
            }
        }
    }
    Ok(out)
}

/// How a half spectrum is widened back to a full row before inversion.
#[derive(Clone, Copy)]
enum Widen {
    /// Mirror with conjugation — the inverse transform of a real signal.
    Hermitian,
    /// Pad with zeros — the adjoint of dropping the mirrored bins.
    Zeros,
}

/// Shared spine of `irfft2_spatial` and the `rfft2_spatial` adjoint: inverse
/// transform down the columns, widen each row per `widen`, inverse transform
/// along rows, return `scale` times the real part.
fn half_to_real2(x: &ComplexTensor, out_width: usize, widen: Widen, scale: f64) -> Result<Tensor> {
    let (c, h, w2) = x.dims3()?;
    if half_width(out_width) != w2 {
        return Err(Error::shape(format!(
            "half spectrum has {w2} columns; full width {out_width} wants {}",
            half_width(out_width)
        )));
    }
    let w = out_width;
    let plan_w = plan_for(w);
    let plan_h = plan_for(h);
    let mut work = x.clone();
    let mut line = vec![C64::ZERO; w.max(h)];
    let mut spec = vec![C64::ZERO; w.max(h)];
    let mut out = Tensor::zeros(&[c, h, w]);
    for ci in 0..c {
        for vi in 0..w2 {
            for hi in 0..h {
                let ix = (ci * h + hi) * w2 + vi;
                line[hi] = C64::new(work.re[ix], work.im[ix]);
            }
            fft(&plan_h, &line[..h], &mut spec[..h], true);
            for hi in 0..h {
                let ix = (ci * h + hi) * w2 + vi;
                work.re[ix] = spec[hi].re;
                work.im[ix] = spec[hi].im;
            }
        }
        for hi in 0..h {
            let base = (ci * h + hi) * w2;
            for vi in 0..w2 {
                line[vi] = C64::new(work.re[base + vi], work.im[base + vi]);
            }
            for vi in w2..w {
                line[vi] = match widen {
                    Widen::Hermitian => line[w - vi].conj(),
                    Widen::Zeros => C64::ZERO,
                };
            }
            fft(&plan_w, &line[..w], &mut spec[..w], true);
            let obase = (ci * h + hi) * w;
            for wi in 0..w {
                out.data_mut()[obase + wi] = spec[wi].re * scale;
            }
        }
    }
    Ok(out)
}

/// Inverse of `rfft2_spatial`. `out_width` names the full spatial width the
/// half spectrum was taken from.
pub fn irfft2_spatial(x: &ComplexTensor, out_width: usize) -> Result<Tensor> {
    let (_, h, _) = x.dims3()?;
    half_to_real2(x, out_width, Widen::Hermitian, 1.0 / (h * out_width) as f64)
}

/// 1-D FFT along the channel axis, keeping C/2+1 bins.
pub fn rfft_channel(x: &Tensor) -> Result<ComplexTensor> {
    let (c, h, w) = x.dims3()?;
    let c2 = half_width(c);
    let plan_c = plan_for(c);
    let mut out = ComplexTensor::zeros(&[c2, h, w]);
    let mut line = vec![C64::ZERO; c];
    let mut spec = vec![C64::ZERO; c];
    let hw = h * w;
    let src = x.data();
    for p in 0..hw {
        for ci in 0..c {
            line[ci] = C64::new(src[ci * hw + p], 0.0);
        }
        fft(&plan_c, &line, &mut spec, false);
        for ki in 0..c2 {
            out.re[ki * hw + p] = spec[ki].re;
            out.im[ki * hw + p] = spec[ki].im;
        }
    }
    Ok(out)
}

/// Shared spine of `irfft_channel` and the `rfft_channel` adjoint.
fn half_to_real_channel(x: &ComplexTensor, out_channels: usize, widen: Widen, scale: f64) -> Result<Tensor> {
    let (c2, h, w) = x.dims3()?;
    if half_width(out_channels) != c2 {
        return Err(Error::shape(format!(
            "half spectrum has {c2} channel bins; full depth {out_channels} wants {}",
            half_width(out_channels)
        )));
    }
    let c = out_channels;
    let plan_c = plan_for(c);
    let mut line = vec![C64::ZERO; c];
    let mut spec = vec![C64::ZERO; c];
    let mut out = Tensor::zeros(&[c, h, w]);
    let hw = h * w;
    for p in 0..hw {
        for ki in 0..c2 {
            line[ki] = C64::new(x.re[ki * hw + p], x.im[ki * hw + p]);
        }
        for ki in c2..c {
            line[ki] = match widen {
                Widen::Hermitian => line[c - ki].conj(),
                Widen::Zeros => C64::ZERO,
            };
        }
        fft(&plan_c, &line, &mut spec, true);
        for ci in 0..c {
            out.data_mut()[ci * hw + p] = spec[ci].re * scale;
        }
    }
    Ok(out)
}

/// Inverse of `rfft_channel`. `out_channels` names the full channel depth.
pub fn irfft_channel(x: &ComplexTensor, out_channels: usize) -> Result<Tensor> {
    half_to_real_channel(x, out_channels, Widen::Hermitian, 1.0 / out_channels as f64)
}

/// Splits a spectrum into amplitude and phase. The phase of an exact zero
/// is defined as 0; elsewhere it is `atan2(im, re)` in (-pi, pi].
pub fn amp_phase(x: &ComplexTensor) -> SpectralPair {
    let amplitude = Tensor::new(
        x.shape(),
        x.re.iter().zip(&x.im).map(|(&r, &i)| r.hypot(i)).collect(),
    )
    .expect("amp plane matches shape");
    let phase = Tensor::new(
        x.shape(),
        x.re
            .iter()
            .zip(&x.im)
            .map(|(&r, &i)| if r == 0.0 && i == 0.0 { 0.0 } else { i.atan2(r) })
            .collect(),
    )
    .expect("phase plane matches shape");
    SpectralPair { amplitude, phase }
}

/// Rebuilds `amp * exp(i * phase)` from a pair; amplitudes must be
/// non-negative so the pair is a genuine polar form.
pub fn complex_from(pair: &SpectralPair) -> Result<ComplexTensor> {
    if let Some((ix, &a)) = pair
        .amplitude
        .data()
        .iter()
        .enumerate()
        .find(|(_, a)| **a < 0.0)
    {
        return Err(Error::domain(format!("negative amplitude {a} at flat index {ix}")));
    }
    polar_parts(&pair.amplitude, &pair.phase)
}

/// `complex_from` without the sign gate: learned gates may legitimately
/// drive an amplitude negative mid-optimization.
pub(crate) fn polar_parts(amplitude: &Tensor, phase: &Tensor) -> Result<ComplexTensor> {
    if amplitude.shape() != phase.shape() {
        return Err(Error::shape(format!(
            "amplitude {:?} vs phase {:?}",
            amplitude.shape(),
            phase.shape()
        )));
    }
    let re = amplitude
        .data()
        .iter()
        .zip(phase.data())
        .map(|(&a, &p)| a * p.cos())
        .collect();
    let im = amplitude
        .data()
        .iter()
        .zip(phase.data())
        .map(|(&a, &p)| a * p.sin())
        .collect();
    ComplexTensor::new(amplitude.shape(), re, im)
}

/// Adjoint of `rfft2_spatial`: cotangents on the half spectrum pulled back
/// to the real C×H×`out_width` input.
pub(crate) fn vjp_rfft2(g: &ComplexTensor, out_width: usize) -> Result<Tensor> {
    half_to_real2(g, out_width, Widen::Zeros, 1.0)
}

/// Adjoint of `irfft2_spatial`: a real cotangent pulled back to the half
/// spectrum, with conjugate-pair bins double-counted.
pub(crate) fn vjp_irfft2(g: &Tensor) -> Result<ComplexTensor> {
    let (_, h, w) = g.dims3()?;
    let mut spec = rfft2_spatial(g)?;
    let (_, _, w2) = spec.dims3()?;
    let weights = half_spectrum_weights(w);
    let norm = 1.0 / (h * w) as f64;
    for i in 0..spec.numel() {
        let s = weights[i % w2] * norm;
        spec.re[i] *= s;
        spec.im[i] *= s;
    }
    Ok(spec)
}

/// Adjoint of `rfft_channel`.
pub(crate) fn vjp_rfft_channel(g: &ComplexTensor, out_channels: usize) -> Result<Tensor> {
    half_to_real_channel(g, out_channels, Widen::Zeros, 1.0)
}

/// Adjoint of `irfft_channel`.
pub(crate) fn vjp_irfft_channel(g: &Tensor) -> Result<ComplexTensor> {
    let (c, h, w) = g.dims3()?;
    let mut spec = rfft_channel(g)?;
    let weights = half_spectrum_weights(c);
    let norm = 1.0 / c as f64;
    let hw = h * w;
    for i in 0..spec.numel() {
        let s = weights[i / hw] * norm;
        spec.re[i] *= s;
        spec.im[i] *= s;
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use oracle::{dft_oracle, irfft2_oracle, irfft_channel_oracle};
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(shape, |_| rng.random_range(-2.0..2.0))
    }

    fn random_spectrum(shape: &[usize], seed: u64) -> ComplexTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = shape.iter().product();
        let re = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let im = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        ComplexTensor::new(shape, re, im).unwrap()
    }

    #[test]
    fn rfft2_of_ones_is_a_pure_dc_bin() {
        let x = Tensor::full(&[1, 2, 2], 1.0);
        let spec = rfft2_spatial(&x).unwrap();
        assert_eq!(spec.shape(), &[1, 2, 2]);
        let want_re = [4.0, 0.0, 0.0, 0.0];
        for i in 0..4 {
            assert!((spec.re()[i] - want_re[i]).abs() < 1e-12);
            assert!(spec.im()[i].abs() < 1e-12);
        }
    }

    #[test]
    fn rfft2_two_by_two_matches_hand_sum() {
        // Independent check: the four bins of [[1,2],[3,4]] worked out from
        // the definition are 10, -2, -4, 0 with zero imaginary parts.
        let x = Tensor::new(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let spec = rfft2_spatial(&x).unwrap();
        let want = [10.0, -2.0, -4.0, 0.0];
        for i in 0..4 {
            assert!((spec.re()[i] - want[i]).abs() < 1e-12, "bin {i}");
            assert!(spec.im()[i].abs() < 1e-12, "bin {i}");
        }
        let oracle = dft_oracle(&x, &[1, 2]).unwrap();
        for i in 0..4 {
            assert!((spec.re()[i] - oracle.re()[i]).abs() < 1e-12);
            assert!((spec.im()[i] - oracle.im()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rfft2_matches_oracle_on_odd_and_prime_extents() {
        for &(c, h, w) in &[(1usize, 8, 8), (2, 5, 7), (3, 6, 9), (1, 1, 4), (2, 4, 1), (1, 13, 3)] {
            let x = random_tensor(&[c, h, w], (c * 100 + h * 10 + w) as u64);
            let spec = rfft2_spatial(&x).unwrap();
            let full = dft_oracle(&x, &[1, 2]).unwrap();
            let w2 = half_width(w);
            for ci in 0..c {
                for hi in 0..h {
                    for vi in 0..w2 {
                        let ix = (ci * h + hi) * w2 + vi;
                        let ox = (ci * h + hi) * w + vi;
                        assert!((spec.re()[ix] - full.re()[ox]).abs() < 1e-10, "{c}x{h}x{w}");
                        assert!((spec.im()[ix] - full.im()[ox]).abs() < 1e-10, "{c}x{h}x{w}");
                    }
                }
            }
        }
    }

    #[test]
    fn irfft2_round_trips_even_and_odd_widths() {
        for &(h, w) in &[(8usize, 8usize), (5, 7), (4, 6), (1, 1), (3, 8), (16, 12)] {
            let x = random_tensor(&[2, h, w], (h * 31 + w) as u64);
            let back = irfft2_spatial(&rfft2_spatial(&x).unwrap(), w).unwrap();
            assert!(back.max_abs_diff(&x) < 1e-10, "{h}x{w}");
        }
    }

    #[test]
    fn irfft2_matches_brute_force_inverse() {
        let spec = random_spectrum(&[1, 4, 4], 9);
        for &w in &[6usize, 7] {
            let fast = irfft2_spatial(&spec, w).unwrap();
            let slow = irfft2_oracle(&spec, w).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-10, "w={w}");
        }
    }

    #[test]
    fn irfft2_rejects_mismatched_width() {
        let spec = random_spectrum(&[1, 4, 5], 3);
        // 5 retained columns come from full widths 8 or 9, not 12.
        assert!(irfft2_spatial(&spec, 12).is_err());
    }

    #[test]
    fn channel_fft_matches_oracle_and_round_trips() {
        for &c in &[1usize, 2, 3, 4, 6, 7, 8] {
            let x = random_tensor(&[c, 3, 4], c as u64);
            let spec = rfft_channel(&x).unwrap();
            assert_eq!(spec.shape(), &[half_width(c), 3, 4]);
            let full = dft_oracle(&x, &[0]).unwrap();
            let hw = 12;
            for ki in 0..half_width(c) {
                for p in 0..hw {
                    assert!((spec.re()[ki * hw + p] - full.re()[ki * hw + p]).abs() < 1e-10);
                    assert!((spec.im()[ki * hw + p] - full.im()[ki * hw + p]).abs() < 1e-10);
                }
            }
            let back = irfft_channel(&spec, c).unwrap();
            assert!(back.max_abs_diff(&x) < 1e-10, "c={c}");
        }
    }

    #[test]
    fn irfft_channel_matches_brute_force_inverse() {
        let spec = random_spectrum(&[3, 2, 2], 21);
        for &c in &[4usize, 5] {
            let fast = irfft_channel(&spec, c).unwrap();
            let slow = irfft_channel_oracle(&spec, c).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-10, "c={c}");
        }
    }

    #[test]
    fn amp_phase_handles_axis_and_zero_bins() {
        let spec = ComplexTensor::new(&[1, 1, 3], vec![3.0, 0.0, -1.0], vec![4.0, 0.0, 0.0]).unwrap();
        let pair = amp_phase(&spec);
        let amp = pair.amplitude.data();
        let ph = pair.phase.data();
        assert!((amp[0] - 5.0).abs() < 1e-12 && (ph[0] - (4.0f64).atan2(3.0)).abs() < 1e-12);
        assert!(amp[1] == 0.0 && ph[1] == 0.0);
        assert!((amp[2] - 1.0).abs() < 1e-12 && (ph[2] - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn complex_from_rejects_negative_amplitude() {
        let pair = SpectralPair {
            amplitude: Tensor::new(&[1, 1, 2], vec![1.0, -0.5]).unwrap(),
            phase: Tensor::zeros(&[1, 1, 2]),
        };
        assert!(matches!(complex_from(&pair), Err(Error::Domain(_))));
    }

    #[test]
    fn half_weights_single_count_dc_and_nyquist() {
        assert_eq!(half_spectrum_weights(8), vec![1.0, 2.0, 2.0, 2.0, 1.0]);
        assert_eq!(half_spectrum_weights(7), vec![1.0, 2.0, 2.0, 2.0]);
        assert_eq!(half_spectrum_weights(1), vec![1.0]);
        assert_eq!(half_spectrum_weights(2), vec![1.0, 1.0]);
    }

    /// Flat inner product `sum(re(a)*re(b) + im(a)*im(b))`.
    fn dot_cc(a: &ComplexTensor, b: &ComplexTensor) -> f64 {
        a.re().iter().zip(b.re()).map(|(x, y)| x * y).sum::<f64>()
            + a.im().iter().zip(b.im()).map(|(x, y)| x * y).sum::<f64>()
    }

    fn dot_rr(a: &Tensor, b: &Tensor) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn adjoint_identities_hold_for_all_four_transforms() {
        // <T(x), g> == <x, T*(g)> pins the VJPs independently of autodiff.
        for &(c, h, w) in &[(2usize, 4, 6), (1, 5, 7), (3, 3, 4)] {
            let x = random_tensor(&[c, h, w], 77);
            let w2 = half_width(w);
            let g = random_spectrum(&[c, h, w2], 78);
            let lhs = dot_cc(&rfft2_spatial(&x).unwrap(), &g);
            let rhs = dot_rr(&x, &vjp_rfft2(&g, w).unwrap());
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "rfft2 {c}x{h}x{w}");

            let spec = random_spectrum(&[c, h, w2], 79);
            let gy = random_tensor(&[c, h, w], 80);
            let lhs = dot_rr(&irfft2_spatial(&spec, w).unwrap(), &gy);
            let rhs = dot_cc(&spec, &vjp_irfft2(&gy).unwrap());
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "irfft2 {c}x{h}x{w}");

            let c2 = half_width(c);
            let gc = random_spectrum(&[c2, h, w], 81);
            let lhs = dot_cc(&rfft_channel(&x).unwrap(), &gc);
            let rhs = dot_rr(&x, &vjp_rfft_channel(&gc, c).unwrap());
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "rfft_channel {c}x{h}x{w}");

            let spec_c = random_spectrum(&[c2, h, w], 82);
            let lhs = dot_rr(&irfft_channel(&spec_c, c).unwrap(), &gy);
            let rhs = dot_cc(&spec_c, &vjp_irfft_channel(&gy).unwrap());
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "irfft_channel {c}x{h}x{w}");
        }
    }

    proptest! {
        #[test]
        fn parseval_holds_on_half_spectrum(h in 1usize..12, w in 1usize..12, seed in 0u64..500) {
            let x = random_tensor(&[1, h, w], seed);
            let spec = rfft2_spatial(&x).unwrap();
            let weights = half_spectrum_weights(w);
            let w2 = half_width(w);
            let mut energy = 0.0;
            for hi in 0..h {
                for vi in 0..w2 {
                    let ix = hi * w2 + vi;
                    energy += weights[vi] * (spec.re()[ix].powi(2) + spec.im()[ix].powi(2));
                }
            }
            let direct: f64 = x.data().iter().map(|v| v * v).sum();
            let scaled = energy / (h * w) as f64;
            prop_assert!((direct - scaled).abs() < 1e-9 * direct.max(1.0));
        }

        #[test]
        fn polar_decomposition_round_trips(seed in 0u64..500) {
            let spec = random_spectrum(&[2, 3, 3], seed);
            let back = complex_from(&amp_phase(&spec)).unwrap();
            prop_assert!(back.max_abs_diff(&spec) < 1e-12);
        }

        #[test]
        fn round_trip_recovers_arbitrary_extents(c in 1usize..4, h in 1usize..10, w in 1usize..10, seed in 0u64..200) {
            let x = random_tensor(&[c, h, w], seed);
            let back = irfft2_spatial(&rfft2_spatial(&x).unwrap(), w).unwrap();
            prop_assert!(back.max_abs_diff(&x) < 1e-10);
            let back_c = irfft_channel(&rfft_channel(&x).unwrap(), c).unwrap();
            prop_assert!(back_c.max_abs_diff(&x) < 1e-10);
        }
    }
}
