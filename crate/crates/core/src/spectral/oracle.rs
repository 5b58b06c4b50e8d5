//! Brute-force DFT evaluated straight from the definition. This module
//! shares no code with the fast engine — it exists to catch the fast path
//! lying, so it must stay slow, obvious, and quadratic.
//!
//! Every transformed axis is capped at 64 points; larger requests are
//! refused rather than silently taking minutes.

use crate::error::{Error, Result};
use crate::spectral::{half_width, ComplexTensor};
use crate::tensor::Tensor;

const MAX_AXIS: usize = 64;

fn check_extent(n: usize, what: &str) -> Result<()> {
    if n > MAX_AXIS {
        return Err(Error::Refusal(format!(
            "{what} extent {n} exceeds the oracle cap of {MAX_AXIS}; use the fast transforms"
        )));
    }
    Ok(())
}

fn element_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * shape[ax + 1];
    }
    strides
}

/// Full-spectrum DFT of a real tensor over the given axes, one axis at a
/// time, each bin computed as an explicit O(n^2) sum.
pub fn dft_oracle(x: &Tensor, axes: &[usize]) -> Result<ComplexTensor> {
    if axes.is_empty() {
        return Err(Error::contract("dft_oracle: no axes given"));
    }
    let shape = x.shape().to_vec();
    for (i, &ax) in axes.iter().enumerate() {
        if ax >= shape.len() {
            return Err(Error::shape(format!("axis {ax} out of range for rank {}", shape.len())));
        }
        if axes[..i].contains(&ax) {
            return Err(Error::contract(format!("dft_oracle: duplicate axis {ax}")));
        }
        check_extent(shape[ax], "transform axis")?;
    }
    let strides = element_strides(&shape);
    let numel = x.numel();
    let mut re = x.data().to_vec();
    let mut im = vec![0.0; numel];
    for &ax in axes {
        let n = shape[ax];
        let stride = strides[ax];
        let mut next_re = vec![0.0; numel];
        let mut next_im = vec![0.0; numel];
        for start in (0..numel).filter(|p| (p / stride) % n == 0) {
            for k in 0..n {
                let mut acc_re = 0.0;
                let mut acc_im = 0.0;
                for j in 0..n {
                    let ang = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                    let (s, c) = ang.sin_cos();
                    let p = start + j * stride;
                    acc_re += re[p] * c - im[p] * s;
                    acc_im += re[p] * s + im[p] * c;
                }
                next_re[start + k * stride] = acc_re;
                next_im[start + k * stride] = acc_im;
            }
        }
        re = next_re;
        im = next_im;
    }
    ComplexTensor::new(&shape, re, im)
}

/// Brute-force inverse of a spatial half spectrum: widen each row by
/// conjugate symmetry on the fly and evaluate the normalized inverse sum
/// per output pixel.
pub fn irfft2_oracle(x: &ComplexTensor, out_width: usize) -> Result<Tensor> {
    let (c, h, w2) = x.dims3()?;
    let w = out_width;
    if half_width(w) != w2 {
        return Err(Error::shape(format!(
            "half spectrum has {w2} columns; full width {w} wants {}",
            half_width(w)
        )));
    }
    check_extent(h, "height")?;
    check_extent(w, "width")?;
    let mut out = Tensor::zeros(&[c, h, w]);
    for ci in 0..c {
        for a in 0..h {
            for b in 0..w {
                let mut acc = 0.0;
                for u in 0..h {
                    for v in 0..w {
                        let (re, im) = if v < w2 {
                            let ix = (ci * h + u) * w2 + v;
                            (x.re()[ix], x.im()[ix])
                        } else {
                            let ix = (ci * h + (h - u) % h) * w2 + (w - v);
                            (x.re()[ix], -x.im()[ix])
                        };
                        let ang = 2.0 * std::f64::consts::PI
                            * (((u * a) % h) as f64 / h as f64 + ((v * b) % w) as f64 / w as f64);
                        acc += re * ang.cos() - im * ang.sin();
                    }
                }
                out.data_mut()[(ci * h + a) * w + b] = acc / (h * w) as f64;
            }
        }
    }
    Ok(out)
}

/// Brute-force inverse of a channel half spectrum.
pub fn irfft_channel_oracle(x: &ComplexTensor, out_channels: usize) -> Result<Tensor> {
    let (c2, h, w) = x.dims3()?;
    let c = out_channels;
    if half_width(c) != c2 {
        return Err(Error::shape(format!(
            "half spectrum has {c2} channel bins; full depth {c} wants {}",
            half_width(c)
        )));
    }
    check_extent(c, "channel depth")?;
    let hw = h * w;
    let mut out = Tensor::zeros(&[c, h, w]);
    for p in 0..hw {
        for a in 0..c {
            let mut acc = 0.0;
            for k in 0..c {
                let (re, im) = if k < c2 {
                    (x.re()[k * hw + p], x.im()[k * hw + p])
                } else {
                    (x.re()[(c - k) * hw + p], -x.im()[(c - k) * hw + p])
                };
                let ang = 2.0 * std::f64::consts::PI * ((k * a) % c) as f64 / c as f64;
                acc += re * ang.cos() - im * ang.sin();
            }
            out.data_mut()[a * hw + p] = acc / c as f64;
        }
    }
    Ok(out)
}
