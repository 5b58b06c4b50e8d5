//! Neural-network kernels on rank-3 tensors, forward passes plus the
//! hand-written adjoints the autodiff layer wires into its tape.
//!
//! Convolutions use the deep-learning orientation (cross-correlation) and
//! are lowered to GEMM via im2col. The GEMM accumulates rows independently
//! in a fixed order, so results are identical whether rows are visited by
//! one thread or many.

use crate::error::{Error, Result};
use crate::parallel;
use crate::tensor::Tensor;

/// `a`(m×k) · `b`(k×n), row-major. Rows of the output are independent, so
/// they parallelize without changing the per-row accumulation order.
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0; m * n];
    parallel::for_each_chunk_mut(&mut out, n, |i, row| {
        for kk in 0..k {
            let av = a[i * k + kk];
            if av == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    });
    out
}

/// `a`(m×k) · `b`(n×k)ᵀ — both operands walked along contiguous rows.
pub(crate) fn matmul_bt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut out = vec![0.0; m * n];
    parallel::for_each_chunk_mut(&mut out, n, |i, row| {
        let arow = &a[i * k..(i + 1) * k];
        for (j, o) in row.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            *o = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    });
    out
}

/// `a`(k×m)ᵀ · `b`(k×n).
pub(crate) fn matmul_at(a: &[f64], b: &[f64], k: usize, m: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0; m * n];
    for kk in 0..k {
        for i in 0..m {
            let av = a[kk * m + i];
            if av == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Pointwise channel mix: y[o,p] = Σ_i w[o,i]·x[i,p] + b[o].
pub fn conv1x1(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (cin, h, wid) = x.dims3()?;
    let (cout, wcin) = match w.shape()[..] {
        [o, i] => (o, i),
        _ => return Err(Error::shape(format!("conv1x1 weight must be rank 2, got {:?}", w.shape()))),
    };
    if wcin != cin || b.shape() != [cout] {
        return Err(Error::shape(format!(
            "conv1x1: x has {cin} channels, weight {:?}, bias {:?}",
            w.shape(),
            b.shape()
        )));
    }
    let hw = h * wid;
    let mut y = matmul(w.data(), x.data(), cout, cin, hw);
    for o in 0..cout {
        let bv = b.data()[o];
        for v in &mut y[o * hw..(o + 1) * hw] {
            *v += bv;
        }
    }
    Tensor::new(&[cout, h, wid], y)
}

pub(crate) fn conv1x1_vjp(x: &Tensor, w: &Tensor, g: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (cin, h, wid) = x.dims3()?;
    let cout = w.shape()[0];
    let hw = h * wid;
    let dx = matmul_at(w.data(), g.data(), cout, cin, hw);
    let dw = matmul_bt(g.data(), x.data(), cout, hw, cin);
    let db: Vec<f64> = (0..cout).map(|o| g.data()[o * hw..(o + 1) * hw].iter().sum()).collect();
    Ok((
        Tensor::new(&[cin, h, wid], dx)?,
        Tensor::new(&[cout, cin], dw)?,
        Tensor::new(&[cout], db)?,
    ))
}

fn conv_out_extent(n: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let span = n + 2 * pad;
    if span < k {
        return Err(Error::shape(format!("kernel {k} exceeds padded extent {span}")));
    }
    Ok((span - k) / stride + 1)
}

/// Unrolls kh×kw patches into a (Cin·kh·kw) × (Hout·Wout) matrix.
fn im2col(x: &Tensor, kh: usize, kw: usize, stride: usize, pad: usize) -> Result<(Vec<f64>, usize, usize)> {
    let (c, h, w) = x.dims3()?;
    let hout = conv_out_extent(h, kh, stride, pad)?;
    let wout = conv_out_extent(w, kw, stride, pad)?;
    let l = hout * wout;
    let mut cols = vec![0.0; c * kh * kw * l];
    let src = x.data();
    for ci in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let r = (ci * kh + ki) * kw + kj;
                let row = &mut cols[r * l..(r + 1) * l];
                for oy in 0..hout {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..wout {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        row[oy * wout + ox] = src[(ci * h + iy as usize) * w + ix as usize];
                    }
                }
            }
        }
    }
    Ok((cols, hout, wout))
}

/// Adjoint of `im2col`: scatter-adds column gradients back onto the image.
fn col2im(dcols: &[f64], c: usize, h: usize, w: usize, kh: usize, kw: usize, stride: usize, pad: usize, hout: usize, wout: usize) -> Tensor {
    let l = hout * wout;
    let mut dx = Tensor::zeros(&[c, h, w]);
    let dst = dx.data_mut();
    for ci in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let r = (ci * kh + ki) * kw + kj;
                let row = &dcols[r * l..(r + 1) * l];
                for oy in 0..hout {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..wout {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        dst[(ci * h + iy as usize) * w + ix as usize] += row[oy * wout + ox];
                    }
                }
            }
        }
    }
    dx
}

/// Dense 2-D cross-correlation, weight layout Cout×Cin×kh×kw.
pub fn conv2d(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let (cin, _, _) = x.dims3()?;
    let (cout, wcin, kh, kw) = match w.shape()[..] {
        [o, i, a, c] => (o, i, a, c),
        _ => return Err(Error::shape(format!("conv2d weight must be rank 4, got {:?}", w.shape()))),
    };
    if wcin != cin || b.shape() != [cout] || stride == 0 {
        return Err(Error::shape(format!(
            "conv2d: x has {cin} channels, weight {:?}, bias {:?}, stride {stride}",
            w.shape(),
            b.shape()
        )));
    }
    let (cols, hout, wout) = im2col(x, kh, kw, stride, pad)?;
    let l = hout * wout;
    let mut y = matmul(w.data(), &cols, cout, cin * kh * kw, l);
    for o in 0..cout {
        let bv = b.data()[o];
        for v in &mut y[o * l..(o + 1) * l] {
            *v += bv;
        }
    }
    Tensor::new(&[cout, hout, wout], y)
}

pub(crate) fn conv2d_vjp(x: &Tensor, w: &Tensor, stride: usize, pad: usize, g: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (cin, h, wid) = x.dims3()?;
    let (cout, _, kh, kw) = match w.shape()[..] {
        [o, i, a, c] => (o, i, a, c),
        _ => unreachable!("validated at forward time"),
    };
    let (cols, hout, wout) = im2col(x, kh, kw, stride, pad)?;
    let l = hout * wout;
    let r = cin * kh * kw;
    let dw = matmul_bt(g.data(), &cols, cout, l, r);
    let dcols = matmul_at(w.data(), g.data(), cout, r, l);
    let dx = col2im(&dcols, cin, h, wid, kh, kw, stride, pad, hout, wout);
    let db: Vec<f64> = (0..cout).map(|o| g.data()[o * l..(o + 1) * l].iter().sum()).collect();
    Ok((dx, Tensor::new(w.shape(), dw)?, Tensor::new(&[cout], db)?))
}

/// Depthwise 3×3 stage (padding 1, stride 1): each channel correlated with
/// its own kernel. Channel mixing, when wanted, is a separate pointwise
/// step so the two adjoints stay simple.
pub fn depthwise3(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (c, h, wid) = x.dims3()?;
    if w.shape() != [c, 3, 3] || b.shape() != [c] {
        return Err(Error::shape(format!(
            "depthwise3: x has {c} channels, weight {:?}, bias {:?}",
            w.shape(),
            b.shape()
        )));
    }
    let mut y = Tensor::zeros(&[c, h, wid]);
    let src = x.data();
    let wk = w.data();
    parallel::for_each_chunk_mut(y.data_mut(), h * wid, |ci, plane| {
        let kb = &wk[ci * 9..ci * 9 + 9];
        let base = ci * h * wid;
        let bias = b.data()[ci];
        for oy in 0..h {
            for ox in 0..wid {
                let mut acc = bias;
                for ky in 0..3usize {
                    let iy = oy as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3usize {
                        let ix = ox as isize + kx as isize - 1;
                        if ix < 0 || ix >= wid as isize {
                            continue;
                        }
                        acc += kb[ky * 3 + kx] * src[base + iy as usize * wid + ix as usize];
                    }
                }
                plane[oy * wid + ox] = acc;
            }
        }
    });
    Ok(y)
}

pub(crate) fn depthwise3_vjp(x: &Tensor, w: &Tensor, g: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (c, h, wid) = x.dims3()?;
    let mut dx = Tensor::zeros(&[c, h, wid]);
    let mut dw = Tensor::zeros(&[c, 3, 3]);
    let mut db = Tensor::zeros(&[c]);
    let src = x.data();
    let gd = g.data();
    let wk = w.data();
    for ci in 0..c {
        let base = ci * h * wid;
        db.data_mut()[ci] = gd[base..base + h * wid].iter().sum();
        for oy in 0..h {
            for ox in 0..wid {
                let gv = gd[base + oy * wid + ox];
                if gv == 0.0 {
                    continue;
                }
                for ky in 0..3usize {
                    let iy = oy as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3usize {
                        let ix = ox as isize + kx as isize - 1;
                        if ix < 0 || ix >= wid as isize {
                            continue;
                        }
                        let six = base + iy as usize * wid + ix as usize;
                        dw.data_mut()[ci * 9 + ky * 3 + kx] += gv * src[six];
                        dx.data_mut()[six] += gv * wk[ci * 9 + ky * 3 + kx];
                    }
                }
            }
        }
    }
    Ok((dx, dw, db))
}

/// y = s·max(x,0)² + b with learnable scalars s, b.
pub fn star_relu(x: &Tensor, s: f64, b: f64) -> Tensor {
    x.map(|v| s * v.max(0.0) * v.max(0.0) + b)
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    x.map(|v| if v >= 0.0 { v } else { slope * v })
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(|v| 1.0 / (1.0 + (-v).exp()))
}

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Channel-vector standardization at every spatial position, then a
/// per-channel affine.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::shape(format!(
            "layer_norm: x has {c} channels, gamma {:?}, beta {:?}",
            gamma.shape(),
            beta.shape()
        )));
    }
    let hw = h * w;
    let src = x.data();
    let mut y = Tensor::zeros(&[c, h, w]);
    let dst = y.data_mut();
    for p in 0..hw {
        let mut mean = 0.0;
        for ci in 0..c {
            mean += src[ci * hw + p];
        }
        mean /= c as f64;
        let mut var = 0.0;
        for ci in 0..c {
            let d = src[ci * hw + p] - mean;
            var += d * d;
        }
        var /= c as f64;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        for ci in 0..c {
            let xhat = (src[ci * hw + p] - mean) * inv;
            dst[ci * hw + p] = gamma.data()[ci] * xhat + beta.data()[ci];
        }
    }
    Ok(y)
}

pub(crate) fn layer_norm_vjp(x: &Tensor, gamma: &Tensor, g: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (c, h, w) = x.dims3()?;
    let hw = h * w;
    let src = x.data();
    let gd = g.data();
    let mut dx = Tensor::zeros(&[c, h, w]);
    let mut dgamma = Tensor::zeros(&[c]);
    let mut dbeta = Tensor::zeros(&[c]);
    for p in 0..hw {
        let mut mean = 0.0;
        for ci in 0..c {
            mean += src[ci * hw + p];
        }
        mean /= c as f64;
        let mut var = 0.0;
        for ci in 0..c {
            let d = src[ci * hw + p] - mean;
            var += d * d;
        }
        var /= c as f64;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        // ghat = upstream·gamma; dx = inv·(ghat − mean(ghat) − xhat·mean(ghat·xhat))
        let mut mean_gh = 0.0;
        let mut mean_ghx = 0.0;
        for ci in 0..c {
            let xhat = (src[ci * hw + p] - mean) * inv;
            let gh = gd[ci * hw + p] * gamma.data()[ci];
            mean_gh += gh;
            mean_ghx += gh * xhat;
            dgamma.data_mut()[ci] += gd[ci * hw + p] * xhat;
            dbeta.data_mut()[ci] += gd[ci * hw + p];
        }
        mean_gh /= c as f64;
        mean_ghx /= c as f64;
        for ci in 0..c {
            let xhat = (src[ci * hw + p] - mean) * inv;
            let gh = gd[ci * hw + p] * gamma.data()[ci];
            dx.data_mut()[ci * hw + p] = inv * (gh - mean_gh - xhat * mean_ghx);
        }
    }
    Ok((dx, dgamma, dbeta))
}

/// Per-channel spatial mean, kept rank-3 as C×1×1.
pub fn gap(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    let hw = (h * w) as f64;
    let data = (0..c)
        .map(|ci| x.data()[ci * h * w..(ci + 1) * h * w].iter().sum::<f64>() / hw)
        .collect();
    Tensor::new(&[c, 1, 1], data)
}

/// Source coordinate and blend weights for one output index under the
/// top-left-aligned scheme p = o / factor (clamped at the far edge). The
/// mapping composes exactly: factor 4 equals factor 2 applied twice.
fn lerp_coords(o: usize, factor: usize, in_extent: usize) -> (usize, usize, f64) {
    let num = o;
    let i0 = num / factor;
    let frac = (num % factor) as f64 / factor as f64;
    let i1 = (i0 + 1).min(in_extent - 1);
    (i0, i1, frac)
}

/// Bilinear upsampling by an integer factor (1 = identity).
pub fn upsample(x: &Tensor, factor: usize) -> Result<Tensor> {
    if factor < 1 {
        return Err(Error::contract("upsample factor must be >= 1"));
    }
    let (c, h, w) = x.dims3()?;
    let (oh, ow) = (h * factor, w * factor);
    let mut y = Tensor::zeros(&[c, oh, ow]);
    let src = x.data();
    let dst = y.data_mut();
    for ci in 0..c {
        for oy in 0..oh {
            let (y0, y1, fy) = lerp_coords(oy, factor, h);
            for ox in 0..ow {
                let (x0, x1, fx) = lerp_coords(ox, factor, w);
                let base = ci * h * w;
                let v00 = src[base + y0 * w + x0];
                let v01 = src[base + y0 * w + x1];
                let v10 = src[base + y1 * w + x0];
                let v11 = src[base + y1 * w + x1];
                let top = v00 + fx * (v01 - v00);
                let bot = v10 + fx * (v11 - v10);
                dst[(ci * oh + oy) * ow + ox] = top + fy * (bot - top);
            }
        }
    }
    Ok(y)
}

pub(crate) fn upsample_vjp(g: &Tensor, in_h: usize, in_w: usize, factor: usize) -> Result<Tensor> {
    let (c, oh, ow) = g.dims3()?;
    let mut dx = Tensor::zeros(&[c, in_h, in_w]);
    let gd = g.data();
    let dst = dx.data_mut();
    for ci in 0..c {
        for oy in 0..oh {
            let (y0, y1, fy) = lerp_coords(oy, factor, in_h);
            for ox in 0..ow {
                let (x0, x1, fx) = lerp_coords(ox, factor, in_w);
                let gv = gd[(ci * oh + oy) * ow + ox];
                let base = ci * in_h * in_w;
                dst[base + y0 * in_w + x0] += gv * (1.0 - fy) * (1.0 - fx);
                dst[base + y0 * in_w + x1] += gv * (1.0 - fy) * fx;
                dst[base + y1 * in_w + x0] += gv * fy * (1.0 - fx);
                dst[base + y1 * in_w + x1] += gv * fy * fx;
            }
        }
    }
    Ok(dx)
}

/// w(m×n)·x(n) + b(m) on rank-1 tensors.
pub fn matvec(w: &Tensor, x: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, n) = match w.shape()[..] {
        [m, n] => (m, n),
        _ => return Err(Error::shape(format!("matvec weight must be rank 2, got {:?}", w.shape()))),
    };
    if x.shape() != [n] || b.shape() != [m] {
        return Err(Error::shape(format!(
            "matvec: weight {:?}, x {:?}, bias {:?}",
            w.shape(),
            x.shape(),
            b.shape()
        )));
    }
    let data = (0..m)
        .map(|i| {
            w.data()[i * n..(i + 1) * n]
                .iter()
                .zip(x.data())
                .map(|(a, v)| a * v)
                .sum::<f64>()
                + b.data()[i]
        })
        .collect();
    Tensor::new(&[m], data)
}

/// Row-wise softmax on a rank-2 tensor, max-shifted for stability.
pub fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    let (r, c) = match x.shape()[..] {
        [r, c] => (r, c),
        _ => return Err(Error::shape(format!("softmax_rows expects rank 2, got {:?}", x.shape()))),
    };
    let mut y = Tensor::zeros(&[r, c]);
    for i in 0..r {
        let row = &x.data()[i * c..(i + 1) * c];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (j, &v) in row.iter().enumerate() {
            let e = (v - m).exp();
            y.data_mut()[i * c + j] = e;
            z += e;
        }
        for j in 0..c {
            y.data_mut()[i * c + j] /= z;
        }
    }
    Ok(y)
}
