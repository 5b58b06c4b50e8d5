//! Op constructors: each method validates shapes, computes the forward
//! value eagerly, and records a closure that maps this node's cotangent to
//! its parents' cotangents.

use super::{Graph, NodeId, Value};
use crate::error::{Error, Result};
use crate::nn;
use crate::spectral::{
    self, half_spectrum_weights, half_width, ComplexTensor,
};
use crate::tensor::Tensor;

impl<'s> Graph<'s> {
    fn unary(
        &mut self,
        op: &'static str,
        x: NodeId,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64 + 'static,
    ) -> Result<NodeId> {
        let xv = self.real(x)?.clone();
        let y = xv.map(&f);
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            Ok(vec![Value::Real(g.zip(&xv, |gv, x_| gv * df(x_))?)])
        });
        Ok(self.push(op, Value::Real(y), vec![x], Some(back)))
    }

    /// Elementwise sum with numpy-style broadcasting; cotangents are summed
    /// back down to each operand's shape.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let ashape = self.real(a)?.shape().to_vec();
        let bshape = self.real(b)?.shape().to_vec();
        let y = self.real(a)?.add(self.real(b)?)?;
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            Ok(vec![
                Value::Real(g.reduce_to(&ashape)?),
                Value::Real(g.reduce_to(&bshape)?),
            ])
        });
        Ok(self.push("add", Value::Real(y), vec![a, b], Some(back)))
    }

    /// Elementwise difference with broadcasting (see `add`).
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let ashape = self.real(a)?.shape().to_vec();
        let bshape = self.real(b)?.shape().to_vec();
        let y = self.real(a)?.sub(self.real(b)?)?;
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            Ok(vec![
                Value::Real(g.reduce_to(&ashape)?),
                Value::Real(g.scale(-1.0).reduce_to(&bshape)?),
            ])
        });
        Ok(self.push("sub", Value::Real(y), vec![a, b], Some(back)))
    }

    /// Elementwise product with broadcasting (see `add`).
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let av = self.real(a)?.clone();
        let bv = self.real(b)?.clone();
        let y = av.mul(&bv)?;
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            Ok(vec![
                Value::Real(g.mul(&bv)?.reduce_to(av.shape())?),
                Value::Real(g.mul(&av)?.reduce_to(bv.shape())?),
            ])
        });
        Ok(self.push("mul", Value::Real(y), vec![a, b], Some(back)))
    }

    /// Elementwise quotient with broadcasting (see `add`). A single correctly
    /// rounded division per element, so a/a is exactly 1; zero denominators
    /// are rejected up front.
    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let av = self.real(a)?.clone();
        let bv = self.real(b)?.clone();
        if bv.data().iter().any(|v| *v == 0.0) {
            return Err(Error::domain("div: zero denominator"));
        }
        let y = av.zip(&bv, |x, d| x / d)?;
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            let da = g.zip(&bv, |gv, d| gv / d)?.reduce_to(av.shape())?;
            let ratio = av.zip(&bv, |x, d| x / (d * d))?;
            let db = g.mul(&ratio)?.scale(-1.0).reduce_to(bv.shape())?;
            Ok(vec![Value::Real(da), Value::Real(db)])
        });
        Ok(self.push("div", Value::Real(y), vec![a, b], Some(back)))
    }

    pub fn scale_node(&mut self, x: NodeId, s: f64) -> Result<NodeId> {
        let y = self.real(x)?.scale(s);
        let back = Box::new(move |g: &Value| Ok(vec![Value::Real(g.as_real()?.scale(s))]));
        Ok(self.push("scale", Value::Real(y), vec![x], Some(back)))
    }

    /// Σ wᵢ·xᵢ over same-shape real nodes.
    pub fn weighted_sum(&mut self, terms: &[(NodeId, f64)]) -> Result<NodeId> {
        let Some(&(first, w0)) = terms.first() else {
            return Err(Error::contract("weighted_sum of no terms"));
        };
        let mut acc = self.real(first)?.scale(w0);
        for &(id, w) in &terms[1..] {
            let t = self.real(id)?;
            if t.shape() != acc.shape() {
                return Err(Error::shape(format!(
                    "weighted_sum: {:?} vs {:?}",
                    t.shape(),
                    acc.shape()
                )));
            }
            acc = acc.add(&t.scale(w))?;
        }
        let weights: Vec<f64> = terms.iter().map(|&(_, w)| w).collect();
        let parents: Vec<NodeId> = terms.iter().map(|&(id, _)| id).collect();
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            Ok(weights.iter().map(|&w| Value::Real(g.scale(w))).collect())
        });
        Ok(self.push("weighted_sum", Value::Real(acc), parents, Some(back)))
    }

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.real(x)?;
        let shape = xv.shape().to_vec();
        let total: f64 = xv.data().iter().sum();
        let back = Box::new(move |g: &Value| {
            let gv = g.as_real()?.item()?;
            Ok(vec![Value::Real(Tensor::full(&shape, gv))])
        });
        Ok(self.push("sum_all", Value::Real(Tensor::scalar(total)), vec![x], Some(back)))
    }

    pub fn mean_all(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.real(x)?;
        let n = xv.numel() as f64;
        let shape = xv.shape().to_vec();
        let mean: f64 = xv.data().iter().sum::<f64>() / n;
        let back = Box::new(move |g: &Value| {
            let gv = g.as_real()?.item()?;
            Ok(vec![Value::Real(Tensor::full(&shape, gv / n))])
        });
        Ok(self.push("mean_all", Value::Real(Tensor::scalar(mean)), vec![x], Some(back)))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary("relu", x, |v| v.max(0.0), |v| if v > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> Result<NodeId> {
        self.unary(
            "leaky_relu",
            x,
            move |v| if v >= 0.0 { v } else { slope * v },
            move |v| if v >= 0.0 { 1.0 } else { slope },
        )
    }

    pub fn recip(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary("recip", x, |v| 1.0 / v, |v| -1.0 / (v * v))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let y = nn::sigmoid(self.real(x)?);
        let yc = y.clone();
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            Ok(vec![Value::Real(g.zip(&yc, |gv, yv| gv * yv * (1.0 - yv))?)])
        });
        Ok(self.push("sigmoid", Value::Real(y), vec![x], Some(back)))
    }

    /// Clamp to [0,1] with the exact subgradient: zero outside the band.
    pub fn clamp01(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(
            "clamp01",
            x,
            |v| v.clamp(0.0, 1.0),
            |v| if (0.0..=1.0).contains(&v) { 1.0 } else { 0.0 },
        )
    }

    /// y = x + c elementwise.
    pub fn offset(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        self.unary("offset", x, move |v| v + c, |_| 1.0)
    }

    /// Mean binary cross-entropy of predictions against a constant target:
    /// −mean(t·ln p̂ + (1−t)·ln(1−p̂)) with p̂ = clamp(p, 1e-7, 1−1e-7).
    /// Clamped coordinates get zero gradient.
    pub fn bce_mean(&mut self, p: NodeId, target: &Tensor) -> Result<NodeId> {
        const FLOOR: f64 = 1e-7;
        let pv = self.real(p)?.clone();
        if pv.shape() != target.shape() {
            return Err(Error::shape(format!(
                "bce_mean: prediction {:?} vs target {:?}",
                pv.shape(),
                target.shape()
            )));
        }
        let n = pv.numel() as f64;
        let mut total = 0.0;
        for (&pi, &ti) in pv.data().iter().zip(target.data()) {
            let c = pi.clamp(FLOOR, 1.0 - FLOOR);
            total -= ti * c.ln() + (1.0 - ti) * (1.0 - c).ln();
        }
        let target = target.clone();
        let back = Box::new(move |g: &Value| {
            let gv = g.as_real()?.item()?;
            let grad = Tensor::from_fn(pv.shape(), |i| {
                let pi = pv.data()[i];
                if !(FLOOR..=1.0 - FLOOR).contains(&pi) {
                    return 0.0;
                }
                gv * (pi - target.data()[i]) / (pi * (1.0 - pi) * n)
            });
            Ok(vec![Value::Real(grad)])
        });
        Ok(self.push("bce_mean", Value::Real(Tensor::scalar(total / n)), vec![p], Some(back)))
    }

    /// y = s·max(x,0)² + b with scalar parameter nodes s and b.
    pub fn star_relu(&mut self, x: NodeId, s: NodeId, b: NodeId) -> Result<NodeId> {
        let xv = self.real(x)?.clone();
        let sv = self.real(s)?.item()?;
        let bv = self.real(b)?.item()?;
        let y = nn::star_relu(&xv, sv, bv);
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            let dx = g.zip(&xv, |gv, x_| gv * 2.0 * sv * x_.max(0.0))?;
            let ds: f64 = g
                .data()
                .iter()
                .zip(xv.data())
                .map(|(gv, &x_)| gv * x_.max(0.0) * x_.max(0.0))
                .sum();
            let db: f64 = g.data().iter().sum();
            Ok(vec![
                Value::Real(dx),
                Value::Real(Tensor::scalar(ds)),
                Value::Real(Tensor::scalar(db)),
            ])
        });
        Ok(self.push("star_relu", Value::Real(y), vec![x, s, b], Some(back)))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<Tensor> = parts
            .iter()
            .map(|&p| self.real(p).cloned())
            .collect::<Result<_>>()?;
        let refs: Vec<&Tensor> = tensors.iter().collect();
        let y = Tensor::concat_channels(&refs)?;
        let channels: Vec<usize> = tensors.iter().map(|t| t.shape()[0]).collect();
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            let mut out = Vec::with_capacity(channels.len());
            let mut from = 0;
            for &c in &channels {
                out.push(Value::Real(g.slice_channels(from, from + c)?));
                from += c;
            }
            Ok(out)
        });
        Ok(self.push("concat", Value::Real(y), parts.to_vec(), Some(back)))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let xv = self.real(x)?;
        let old_shape = xv.shape().to_vec();
        let y = xv.reshape(shape)?;
        let back = Box::new(move |g: &Value| {
            Ok(vec![Value::Real(g.as_real()?.reshape(&old_shape)?)])
        });
        Ok(self.push("reshape", Value::Real(y), vec![x], Some(back)))
    }

    /// Per-channel spatial mean to C×1×1.
    pub fn gap(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.real(x)?;
        let (c, h, w) = xv.dims3()?;
        let y = nn::gap(xv)?;
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            let mut dx = Tensor::zeros(&[c, h, w]);
            for ci in 0..c {
                let gv = g.data()[ci] / (h * w) as f64;
                for v in &mut dx.data_mut()[ci * h * w..(ci + 1) * h * w] {
                    *v = gv;
                }
            }
            Ok(vec![Value::Real(dx)])
        });
        Ok(self.push("gap", Value::Real(y), vec![x], Some(back)))
    }

    pub fn upsample(&mut self, x: NodeId, factor: usize) -> Result<NodeId> {
        let xv = self.real(x)?;
        let (_, h, w) = xv.dims3()?;
        let y = nn::upsample(xv, factor)?;
        let back = Box::new(move |g: &Value| {
            Ok(vec![Value::Real(nn::upsample_vjp(g.as_real()?, h, w, factor)?)])
        });
        Ok(self.push("upsample", Value::Real(y), vec![x], Some(back)))
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
        let wv = self.real(w)?.clone();
        let xv = self.real(x)?.clone();
        let bv = self.real(b)?;
        let y = nn::matvec(&wv, &xv, bv)?;
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            let (m, n) = (wv.shape()[0], wv.shape()[1]);
            let mut dw = Tensor::zeros(&[m, n]);
            let mut dx = Tensor::zeros(&[n]);
            for i in 0..m {
                let gv = g.data()[i];
                for j in 0..n {
                    dw.data_mut()[i * n + j] = gv * xv.data()[j];
                    dx.data_mut()[j] += gv * wv.data()[i * n + j];
                }
            }
            Ok(vec![Value::Real(dw), Value::Real(dx), Value::Real(g.clone())])
        });
        Ok(self.push("matvec", Value::Real(y), vec![w, x, b], Some(back)))
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let y = nn::softmax_rows(self.real(x)?)?;
        let yc = y.clone();
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            let (r, c) = (yc.shape()[0], yc.shape()[1]);
            let mut dx = Tensor::zeros(&[r, c]);
            for i in 0..r {
                let grow = &g.data()[i * c..(i + 1) * c];
                let yrow = &yc.data()[i * c..(i + 1) * c];
                let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                for j in 0..c {
                    dx.data_mut()[i * c + j] = (grow[j] - dot) * yrow[j];
                }
            }
            Ok(vec![Value::Real(dx)])
        });
        Ok(self.push("softmax_rows", Value::Real(y), vec![x], Some(back)))
    }

    pub fn conv1x1(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xv = self.real(x)?.clone();
        let wv = self.real(w)?.clone();
        let y = nn::conv1x1(&xv, &wv, self.real(b)?)?;
        let back = Box::new(move |g: &Value| {
            let (dx, dw, db) = nn::conv1x1_vjp(&xv, &wv, g.as_real()?)?;
            Ok(vec![Value::Real(dx), Value::Real(dw), Value::Real(db)])
        });
        Ok(self.push("conv1x1", Value::Real(y), vec![x, w, b], Some(back)))
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, pad: usize) -> Result<NodeId> {
        let xv = self.real(x)?.clone();
        let wv = self.real(w)?.clone();
        let y = nn::conv2d(&xv, &wv, self.real(b)?, stride, pad)?;
        let back = Box::new(move |g: &Value| {
            let (dx, dw, db) = nn::conv2d_vjp(&xv, &wv, stride, pad, g.as_real()?)?;
            Ok(vec![Value::Real(dx), Value::Real(dw), Value::Real(db)])
        });
        Ok(self.push("conv2d", Value::Real(y), vec![x, w, b], Some(back)))
    }

    pub fn depthwise3(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xv = self.real(x)?.clone();
        let wv = self.real(w)?.clone();
        let y = nn::depthwise3(&xv, &wv, self.real(b)?)?;
        let back = Box::new(move |g: &Value| {
            let (dx, dw, db) = nn::depthwise3_vjp(&xv, &wv, g.as_real()?)?;
            Ok(vec![Value::Real(dx), Value::Real(dw), Value::Real(db)])
        });
        Ok(self.push("depthwise3", Value::Real(y), vec![x, w, b], Some(back)))
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let xv = self.real(x)?.clone();
        let gv = self.real(gamma)?.clone();
        let y = nn::layer_norm(&xv, &gv, self.real(beta)?)?;
        let back = Box::new(move |g: &Value| {
            let (dx, dgamma, dbeta) = nn::layer_norm_vjp(&xv, &gv, g.as_real()?)?;
            Ok(vec![Value::Real(dx), Value::Real(dgamma), Value::Real(dbeta)])
        });
        Ok(self.push("layer_norm", Value::Real(y), vec![x, gamma, beta], Some(back)))
    }

    // ---- spectral / complex ----

    pub fn rfft2(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.real(x)?;
        let (_, _, w) = xv.dims3()?;
        let y = spectral::rfft2_spatial(xv)?;
        let back = Box::new(move |g: &Value| {
            Ok(vec![Value::Real(spectral::vjp_rfft2(g.as_complex()?, w)?)])
        });
        Ok(self.push("rfft2", Value::Complex(y), vec![x], Some(back)))
    }

    pub fn irfft2(&mut self, x: NodeId, out_width: usize) -> Result<NodeId> {
        let y = spectral::irfft2_spatial(self.complex(x)?, out_width)?;
        let back = Box::new(move |g: &Value| {
            Ok(vec![Value::Complex(spectral::vjp_irfft2(g.as_real()?)?)])
        });
        Ok(self.push("irfft2", Value::Real(y), vec![x], Some(back)))
    }

    pub fn rfft_ch(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.real(x)?;
        let (c, _, _) = xv.dims3()?;
        let y = spectral::rfft_channel(xv)?;
        let back = Box::new(move |g: &Value| {
            Ok(vec![Value::Real(spectral::vjp_rfft_channel(g.as_complex()?, c)?)])
        });
        Ok(self.push("rfft_channel", Value::Complex(y), vec![x], Some(back)))
    }

    pub fn irfft_ch(&mut self, x: NodeId, out_channels: usize) -> Result<NodeId> {
        let y = spectral::irfft_channel(self.complex(x)?, out_channels)?;
        let back = Box::new(move |g: &Value| {
            Ok(vec![Value::Complex(spectral::vjp_irfft_channel(g.as_real()?)?)])
        });
        Ok(self.push("irfft_channel", Value::Real(y), vec![x], Some(back)))
    }

    /// Modulus per bin. Where the modulus is below 1e-12 the subgradient 0
    /// is used — the true derivative blows up at the origin.
    pub fn amp(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.complex(x)?.clone();
        let pair = spectral::amp_phase(&xv);
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            let n = xv.numel();
            let mut dre = vec![0.0; n];
            let mut dim = vec![0.0; n];
            for i in 0..n {
                let (re, im) = (xv.re()[i], xv.im()[i]);
                let a = re.hypot(im);
                if a >= 1e-12 {
                    dre[i] = g.data()[i] * re / a;
                    dim[i] = g.data()[i] * im / a;
                }
            }
            Ok(vec![Value::Complex(ComplexTensor::new(xv.shape(), dre, dim)?)])
        });
        Ok(self.push("amp", Value::Real(pair.amplitude), vec![x], Some(back)))
    }

    /// Argument per bin, with the same origin guard as `amp`.
    pub fn phase(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.complex(x)?.clone();
        let pair = spectral::amp_phase(&xv);
        let back = Box::new(move |g: &Value| {
            let g = g.as_real()?;
            let n = xv.numel();
            let mut dre = vec![0.0; n];
            let mut dim = vec![0.0; n];
            for i in 0..n {
                let (re, im) = (xv.re()[i], xv.im()[i]);
                let a2 = re * re + im * im;
                if a2.sqrt() >= 1e-12 {
                    dre[i] = -g.data()[i] * im / a2;
                    dim[i] = g.data()[i] * re / a2;
                }
            }
            Ok(vec![Value::Complex(ComplexTensor::new(xv.shape(), dre, dim)?)])
        });
        Ok(self.push("phase", Value::Real(pair.phase), vec![x], Some(back)))
    }

    /// amp·e^{i·phase} from real nodes. Amplitude signs are not gated here:
    /// learned gates may scale an amplitude negative mid-training, which is
    /// still a well-defined complex number.
    pub fn polar(&mut self, amp: NodeId, phase: NodeId) -> Result<NodeId> {
        let av = self.real(amp)?.clone();
        let pv = self.real(phase)?.clone();
        let y = spectral::polar_parts(&av, &pv)?;
        let back = Box::new(move |g: &Value| {
            let g = g.as_complex()?;
            let n = av.numel();
            let mut da = vec![0.0; n];
            let mut dp = vec![0.0; n];
            for i in 0..n {
                let (a, p) = (av.data()[i], pv.data()[i]);
                let (sin, cos) = p.sin_cos();
                da[i] = g.re()[i] * cos + g.im()[i] * sin;
                dp[i] = a * (-g.re()[i] * sin + g.im()[i] * cos);
            }
            Ok(vec![
                Value::Real(Tensor::new(av.shape(), da)?),
                Value::Real(Tensor::new(pv.shape(), dp)?),
            ])
        });
        Ok(self.push("polar", Value::Complex(y), vec![amp, phase], Some(back)))
    }

    /// Pairs two real nodes into one complex node.
    pub fn complex_join(&mut self, re: NodeId, im: NodeId) -> Result<NodeId> {
        let rv = self.real(re)?.clone();
        let iv = self.real(im)?;
        if rv.shape() != iv.shape() {
            return Err(Error::shape(format!(
                "complex_join: {:?} vs {:?}",
                rv.shape(),
                iv.shape()
            )));
        }
        let y = ComplexTensor::new(rv.shape(), rv.data().to_vec(), iv.data().to_vec())?;
        let back = Box::new(move |g: &Value| {
            let g = g.as_complex()?;
            Ok(vec![Value::Real(g.re_tensor()), Value::Real(g.im_tensor())])
        });
        Ok(self.push("complex_join", Value::Complex(y), vec![re, im], Some(back)))
    }

    pub fn cadd(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let y = self.complex(a)?.add(self.complex(b)?)?;
        let back = Box::new(move |g: &Value| {
            let g = g.as_complex()?;
            Ok(vec![Value::Complex(g.clone()), Value::Complex(g.clone())])
        });
        Ok(self.push("cadd", Value::Complex(y), vec![a, b], Some(back)))
    }

    /// Elementwise complex product; cotangents follow the conjugate rule
    /// da = g·conj(b), db = g·conj(a).
    pub fn cmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let av = self.complex(a)?.clone();
        let bv = self.complex(b)?.clone();
        if av.shape() != bv.shape() {
            return Err(Error::shape(format!("cmul: {:?} vs {:?}", av.shape(), bv.shape())));
        }
        let n = av.numel();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for i in 0..n {
            re[i] = av.re()[i] * bv.re()[i] - av.im()[i] * bv.im()[i];
            im[i] = av.re()[i] * bv.im()[i] + av.im()[i] * bv.re()[i];
        }
        let y = ComplexTensor::new(av.shape(), re, im)?;
        let back = Box::new(move |g: &Value| {
            let g = g.as_complex()?;
            let mut dar = vec![0.0; n];
            let mut dai = vec![0.0; n];
            let mut dbr = vec![0.0; n];
            let mut dbi = vec![0.0; n];
            for i in 0..n {
                let (gr, gi) = (g.re()[i], g.im()[i]);
                dar[i] = gr * bv.re()[i] + gi * bv.im()[i];
                dai[i] = gi * bv.re()[i] - gr * bv.im()[i];
                dbr[i] = gr * av.re()[i] + gi * av.im()[i];
                dbi[i] = gi * av.re()[i] - gr * av.im()[i];
            }
            Ok(vec![
                Value::Complex(ComplexTensor::new(av.shape(), dar, dai)?),
                Value::Complex(ComplexTensor::new(bv.shape(), dbr, dbi)?),
            ])
        });
        Ok(self.push("cmul", Value::Complex(y), vec![a, b], Some(back)))
    }

    /// Complex spectrum scaled per bin by a real mask; the mask may be
    /// H×W-shaped (shared across channels) or match the spectrum exactly.
    pub fn cmul_mask(&mut self, x: NodeId, mask: NodeId) -> Result<NodeId> {
        let xv = self.complex(x)?.clone();
        let mv = self.real(mask)?.clone();
        let (c, h, w2) = xv.dims3()?;
        let shared = mv.shape() == [h, w2];
        if !shared && mv.shape() != [c, h, w2] {
            return Err(Error::shape(format!(
                "cmul_mask: spectrum {:?} vs mask {:?}",
                xv.shape(),
                mv.shape()
            )));
        }
        let plane = h * w2;
        let n = xv.numel();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for i in 0..n {
            let m = if shared { mv.data()[i % plane] } else { mv.data()[i] };
            re[i] = xv.re()[i] * m;
            im[i] = xv.im()[i] * m;
        }
        let y = ComplexTensor::new(xv.shape(), re, im)?;
        let mshape = mv.shape().to_vec();
        let back = Box::new(move |g: &Value| {
            let g = g.as_complex()?;
            let mut dre = vec![0.0; n];
            let mut dim = vec![0.0; n];
            let mut dm = vec![0.0; mv.numel()];
            for i in 0..n {
                let mix = if shared { i % plane } else { i };
                dre[i] = g.re()[i] * mv.data()[mix];
                dim[i] = g.im()[i] * mv.data()[mix];
                dm[mix] += g.re()[i] * xv.re()[i] + g.im()[i] * xv.im()[i];
            }
            Ok(vec![
                Value::Complex(ComplexTensor::new(xv.shape(), dre, dim)?),
                Value::Real(Tensor::new(&mshape, dm)?),
            ])
        });
        Ok(self.push("cmul_mask", Value::Complex(y), vec![x, mask], Some(back)))
    }

    /// Per-channel mixture of a complex filter bank: out[c] = Σₙ A[c,n]·B[n]
    /// with real coefficients A (C×N) and bank B (N×H×W).
    pub fn mix_filters(&mut self, coeffs: NodeId, bank: NodeId) -> Result<NodeId> {
        let av = self.real(coeffs)?.clone();
        let bv = self.complex(bank)?.clone();
        let (c, nf) = match av.shape()[..] {
            [c, n] => (c, n),
            _ => return Err(Error::shape(format!("mix_filters coeffs must be rank 2, got {:?}", av.shape()))),
        };
        let (bn, h, w2) = bv.dims3()?;
        if bn != nf {
            return Err(Error::shape(format!("mix_filters: {nf} coefficients vs {bn} filters")));
        }
        let plane = h * w2;
        let mut out = ComplexTensor::zeros(&[c, h, w2]);
        for ci in 0..c {
            for ni in 0..nf {
                let a = av.data()[ci * nf + ni];
                if a == 0.0 {
                    continue;
                }
                for p in 0..plane {
                    out.re_mut()[ci * plane + p] += a * bv.re()[ni * plane + p];
                    out.im_mut()[ci * plane + p] += a * bv.im()[ni * plane + p];
                }
            }
        }
        let back = Box::new(move |g: &Value| {
            let g = g.as_complex()?;
            let mut da = Tensor::zeros(&[c, nf]);
            let mut db = ComplexTensor::zeros(&[nf, h, w2]);
            for ci in 0..c {
                for ni in 0..nf {
                    let mut acc = 0.0;
                    let a = av.data()[ci * nf + ni];
                    for p in 0..plane {
                        let gre = g.re()[ci * plane + p];
                        let gim = g.im()[ci * plane + p];
                        acc += gre * bv.re()[ni * plane + p] + gim * bv.im()[ni * plane + p];
                        db.re_mut()[ni * plane + p] += a * gre;
                        db.im_mut()[ni * plane + p] += a * gim;
                    }
                    da.data_mut()[ci * nf + ni] = acc;
                }
            }
            Ok(vec![Value::Real(da), Value::Complex(db)])
        });
        Ok(self.push("mix_filters", Value::Complex(out), vec![coeffs, bank], Some(back)))
    }

    /// Conjugate-pair-weighted spectral energy: Σ w_v·|rfft2(x)|² over the
    /// half spectrum, which equals H·W·Σx² by Parseval.
    pub fn spectrum_energy(&mut self, x: NodeId) -> Result<NodeId> {
        let (_, _, w) = self.real(x)?.dims3()?;
        let weights = half_spectrum_weights(w);
        let q = Tensor::new(&[1, half_width(w)], weights)?;
        self.energy_with_weights("spectrum_energy", x, q)
    }

    /// Σ q(u,v)·|rfft2(x)(c,u,v)|² for a fixed per-bin weight map q of shape
    /// H×(⌊W/2⌋+1). q is a constant: no gradient flows into it.
    pub fn weighted_spectrum_energy(&mut self, x: NodeId, q: &Tensor) -> Result<NodeId> {
        let (_, h, w) = self.real(x)?.dims3()?;
        if q.shape() != [h, half_width(w)] {
            return Err(Error::shape(format!(
                "weighted_spectrum_energy: weight map {:?} does not match half spectrum [{h}, {}]",
                q.shape(),
                half_width(w)
            )));
        }
        self.energy_with_weights("weighted_spectrum_energy", x, q.clone())
    }

    /// Shared core: q is broadcast over rows when it has a single row,
    /// otherwise indexed per (row, col) bin; channels always share q.
    fn energy_with_weights(&mut self, op: &'static str, x: NodeId, q: Tensor) -> Result<NodeId> {
        let xv = self.real(x)?;
        let (_, h, w) = xv.dims3()?;
        let spec = spectral::rfft2_spatial(xv)?;
        let w2 = half_width(w);
        let qrows = q.shape()[0];
        let qat = move |i: usize, q: &Tensor| {
            let row = (i / w2) % h;
            q.data()[(row % qrows) * w2 + i % w2]
        };
        let mut total = 0.0;
        for i in 0..spec.numel() {
            total += qat(i, &q) * (spec.re()[i] * spec.re()[i] + spec.im()[i] * spec.im()[i]);
        }
        let back = Box::new(move |g: &Value| {
            let gv = g.as_real()?.item()?;
            let n = spec.numel();
            let mut dre = vec![0.0; n];
            let mut dim = vec![0.0; n];
            for i in 0..n {
                let s = 2.0 * gv * qat(i, &q);
                dre[i] = s * spec.re()[i];
                dim[i] = s * spec.im()[i];
            }
            let dspec = ComplexTensor::new(spec.shape(), dre, dim)?;
            Ok(vec![Value::Real(spectral::vjp_rfft2(&dspec, w)?)])
        });
        Ok(self.push(op, Value::Real(Tensor::scalar(total)), vec![x], Some(back)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;

    #[test]
    fn concat_backward_slices_by_source() {
        let mut store = ParamStore::new();
        let a = store.register("a", Tensor::full(&[1, 2, 2], 1.0)).unwrap();
        let b = store.register("b", Tensor::full(&[2, 2, 2], 1.0)).unwrap();
        let mut g = Graph::new(&store);
        let an = g.param(a);
        let bn = g.param(b);
        let cat = g.concat(&[an, bn]).unwrap();
        // Weight channel 0 by 1 and channels 1-2 by 3 via an elementwise mul.
        let mask = Tensor::new(&[3, 2, 2], vec![1.0; 4].into_iter().chain(vec![3.0; 8]).collect()).unwrap();
        let mnode = g.input(mask);
        let prod = g.mul(cat, mnode).unwrap();
        let loss = g.sum_all(prod).unwrap();
        g.backward(loss).unwrap();
        let grads = g.param_grads().unwrap();
        assert!(grads.get(a).unwrap().data().iter().all(|&v| v == 1.0));
        assert!(grads.get(b).unwrap().data().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn mix_filters_matches_hand_combination() {
        let mut store = ParamStore::new();
        let c = store
            .register("coeffs", Tensor::new(&[1, 2], vec![2.0, -1.0]).unwrap())
            .unwrap();
        let bre = store
            .register("bank_re", Tensor::new(&[2, 1, 2], vec![1.0, 0.0, 0.5, 1.0]).unwrap())
            .unwrap();
        let bim = store
            .register("bank_im", Tensor::new(&[2, 1, 2], vec![0.0, 1.0, 0.25, 0.0]).unwrap())
            .unwrap();
        let mut g = Graph::new(&store);
        let cn = g.param(c);
        let re = g.param(bre);
        let im = g.param(bim);
        let bank = g.complex_join(re, im).unwrap();
        let mixed = g.mix_filters(cn, bank).unwrap();
        let got = g.complex(mixed).unwrap();
        // 2·(1, 0·i; 0, 1·i) − 1·(0.5, 0.25·i; 1, 0·i)
        assert_eq!(got.re(), &[2.0 - 0.5, 0.0 - 1.0]);
        assert_eq!(got.im(), &[0.0 - 0.25, 2.0 - 0.0]);
    }

    #[test]
    fn polar_of_amp_phase_is_identity_on_the_graph() {
        let mut store = ParamStore::new();
        let re = store
            .register("re", Tensor::from_fn(&[1, 2, 3], |i| (i as f64 * 0.7).sin() + 0.2))
            .unwrap();
        let im = store
            .register("im", Tensor::from_fn(&[1, 2, 3], |i| (i as f64 * 0.4).cos()))
            .unwrap();
        let mut g = Graph::new(&store);
        let rn = g.param(re);
        let in_ = g.param(im);
        let z = g.complex_join(rn, in_).unwrap();
        let a = g.amp(z).unwrap();
        let p = g.phase(z).unwrap();
        let back = g.polar(a, p).unwrap();
        let orig = g.complex(z).unwrap().clone();
        assert!(g.complex(back).unwrap().max_abs_diff(&orig) < 1e-12);
    }

    #[test]
    fn cmul_mask_broadcasts_over_channels() {
        let mut store = ParamStore::new();
        let re = store.register("re", Tensor::full(&[2, 1, 2], 3.0)).unwrap();
        let im = store.register("im", Tensor::full(&[2, 1, 2], -1.0)).unwrap();
        let mask = store
            .register("mask", Tensor::new(&[1, 2], vec![0.5, 2.0]).unwrap())
            .unwrap();
        let mut g = Graph::new(&store);
        let rn = g.param(re);
        let in_ = g.param(im);
        let mn = g.param(mask);
        let z = g.complex_join(rn, in_).unwrap();
        let y = g.cmul_mask(z, mn).unwrap();
        let yv = g.complex(y).unwrap();
        assert_eq!(yv.re(), &[1.5, 6.0, 1.5, 6.0]);
        assert_eq!(yv.im(), &[-0.5, -2.0, -0.5, -2.0]);
    }
}
