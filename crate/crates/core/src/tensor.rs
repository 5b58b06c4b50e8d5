//! Dense real tensor with row-major (width-fastest) layout.
//!
//! Shapes follow channel-height-width semantics for feature maps; rank is
//! otherwise unconstrained and scalars are shape `[1]`.

use crate::error::{Error, Result};

/// Dense 64-bit float tensor. Immutable by convention: ops return new values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from explicit contents.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::shape(format!("zero extent in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} wants {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// All-`fill` tensor of the given shape.
    pub fn full(shape: &[usize], fill: f64) -> Self {
        let n: usize = shape.iter().product::<usize>().max(0);
        Tensor { shape: shape.to_vec(), data: vec![fill; n] }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    /// Rank-1 scalar wrapper.
    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n: usize = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(|i| f(i)).collect() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Interprets the tensor as C×H×W.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::shape(format!("expected rank-3 tensor, got {:?}", self.shape))),
        }
    }

    /// Value of a rank-1 scalar.
    pub fn item(&self) -> Result<f64> {
        if self.numel() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::contract(format!("item() on non-scalar shape {:?}", self.shape)))
        }
    }

    pub fn at3(&self, c: usize, h: usize, w: usize) -> f64 {
        let (_, hh, ww) = (self.shape[0], self.shape[1], self.shape[2]);
        self.data[(c * hh + h) * ww + w]
    }

    /// Same-numel shape change.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape, self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip(rhs, |a, b| a - b)
    }

    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip(rhs, |a, b| a * b)
    }

    /// Elementwise combine with numpy-style broadcasting (extent 1 stretches,
    /// shorter ranks are left-padded with 1).
    pub fn zip(&self, rhs: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape == rhs.shape {
            let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
            return Ok(Tensor { shape: self.shape.clone(), data });
        }
        let rank = self.rank().max(rhs.rank());
        let ls = pad_shape(&self.shape, rank);
        let rs = pad_shape(&rhs.shape, rank);
        let mut out_shape = Vec::with_capacity(rank);
        for (&l, &r) in ls.iter().zip(&rs) {
            if l == r || l == 1 || r == 1 {
                out_shape.push(l.max(r));
            } else {
                return Err(Error::shape(format!(
                    "cannot broadcast {:?} with {:?}",
                    self.shape, rhs.shape
                )));
            }
        }
        let lstr = broadcast_strides(&ls, &out_shape);
        let rstr = broadcast_strides(&rs, &out_shape);
        let n: usize = out_shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; rank];
        let (mut li, mut ri) = (0usize, 0usize);
        for _ in 0..n {
            data.push(f(self.data[li], rhs.data[ri]));
            // Odometer increment over the output index space.
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                li += lstr[ax];
                ri += rstr[ax];
                if idx[ax] < out_shape[ax] {
                    break;
                }
                idx[ax] = 0;
                li -= lstr[ax] * out_shape[ax];
                ri -= rstr[ax] * out_shape[ax];
            }
        }
        Ok(Tensor { shape: out_shape, data })
    }

    /// Sums `self` down to `target` shape, undoing broadcasting.
    pub fn reduce_to(&self, target: &[usize]) -> Result<Tensor> {
        if self.shape == target {
            return Ok(self.clone());
        }
        let rank = self.rank();
        let ts = pad_shape(target, rank);
        for (&s, &t) in self.shape.iter().zip(&ts) {
            if s != t && t != 1 {
                return Err(Error::shape(format!(
                    "cannot reduce {:?} to {target:?}",
                    self.shape
                )));
            }
        }
        let mut out = Tensor::zeros(&ts);
        let ostr = broadcast_strides(&ts, &self.shape);
        let mut idx = vec![0usize; rank];
        let mut oi = 0usize;
        for &v in &self.data {
            out.data[oi] += v;
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                oi += ostr[ax];
                if idx[ax] < self.shape[ax] {
                    break;
                }
                idx[ax] = 0;
                oi -= ostr[ax] * self.shape[ax];
            }
        }
        out.reshape(target)
    }

    /// Concatenates along the channel (first) axis; spatial extents must agree.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(Error::contract("concat_channels of empty list".to_string()));
        }
        let (_, h, w) = parts[0].dims3()?;
        let mut channels = 0usize;
        for t in parts {
            let (c, th, tw) = t.dims3()?;
            if (th, tw) != (h, w) {
                return Err(Error::shape(format!(
                    "concat spatial mismatch: {h}x{w} vs {th}x{tw}"
                )));
            }
            channels += c;
        }
        let mut data = Vec::with_capacity(channels * h * w);
        for t in parts {
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor { shape: vec![channels, h, w], data })
    }

    /// Channel range `[from, to)` of a rank-3 tensor.
    pub fn slice_channels(&self, from: usize, to: usize) -> Result<Tensor> {
        let (c, h, w) = self.dims3()?;
        if from >= to || to > c {
            return Err(Error::shape(format!("slice {from}..{to} out of {c} channels")));
        }
        let data = self.data[from * h * w..to * h * w].to_vec();
        Ok(Tensor { shape: vec![to - from, h, w], data })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Max absolute difference against another tensor of the same shape.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn pad_shape(shape: &[usize], rank: usize) -> Vec<usize> {
    let mut s = vec![1usize; rank - shape.len()];
    s.extend_from_slice(shape);
    s
}

/// Element strides for iterating `shape` positions inside `from` (stride 0 on
/// stretched axes).
fn broadcast_strides(from: &[usize], shape: &[usize]) -> Vec<usize> {
    let rank = shape.len();
    let mut strides = vec![0usize; rank];
    let mut acc = 1usize;
    for ax in (0..rank).rev() {
        if from[ax] == shape[ax] {
            strides[ax] = acc;
        }
        acc *= from[ax];
    }
    strides
}
