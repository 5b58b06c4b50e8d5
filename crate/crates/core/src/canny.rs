//! Canny edge targets for the edge supervision: Gaussian smoothing, Sobel
//! gradients, non-maximum suppression, and hysteresis tracking. Operates on
//! binary masks and returns a thin binary edge map of the same shape.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Edge-extraction parameters. Thresholds are fractions of the maximum
/// gradient magnitude after suppression.
#[derive(Debug, Clone, Copy)]
pub struct CannyParams {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams { sigma: 1.4, low: 0.1, high: 0.2 }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigma <= 0.0 {
            return Err(Error::contract("canny sigma must be positive"));
        }
        if !(0.0..=1.0).contains(&self.low)
            || !(0.0..=1.0).contains(&self.high)
            || self.low > self.high
        {
            return Err(Error::contract(format!(
                "canny thresholds need 0 ≤ low ≤ high ≤ 1, got {} and {}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// Extracts (height, width) from a [h, w] or [1, h, w] map.
fn plane_dims(g: &Tensor) -> Result<(usize, usize)> {
    match g.shape() {
        [h, w] => Ok((*h, *w)),
        [1, h, w] => Ok((*h, *w)),
        other => Err(Error::shape(format!(
            "canny expects a single-plane map, got shape {other:?}"
        ))),
    }
}

/// 5×5 convolution with replicate padding, used for the Gaussian stage.
fn smooth5(src: &[f64], h: usize, w: usize, k: &[f64; 25]) -> Vec<f64> {
    let at = |y: isize, x: isize| -> f64 {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        src[y * w + x]
    };
    let mut out = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for dy in -2..=2isize {
                for dx in -2..=2isize {
                    acc += k[((dy + 2) * 5 + dx + 2) as usize] * at(y + dy, x + dx);
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

fn gaussian5(sigma: f64) -> [f64; 25] {
    let mut k = [0.0; 25];
    let mut total = 0.0;
    for dy in -2..=2isize {
        for dx in -2..=2isize {
            let v = (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
            k[((dy + 2) * 5 + dx + 2) as usize] = v;
            total += v;
        }
    }
    for v in &mut k {
        *v /= total;
    }
    k
}

/// Binary edge map of a binary mask.
///
/// Pipeline: Gaussian 5×5 smooth → Sobel gradients (replicate borders) →
/// per-pixel suppression against the two neighbors along the gradient
/// direction → hysteresis from strong pixels through weak ones
/// (8-connected). A featureless input yields an all-zero map.
pub fn canny_edges(g: &Tensor, params: &CannyParams) -> Result<Tensor> {
    params.validate()?;
    if let Some(bad) = g.data().iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::contract(format!(
            "canny input must be binary, found {bad}"
        )));
    }
    let (h, w) = plane_dims(g)?;
    let smoothed = smooth5(g.data(), h, w, &gaussian5(params.sigma));

    // 1. Sobel gradients with replicate borders.
    let at = |y: isize, x: isize| -> f64 {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        smoothed[y * w + x]
    };
    let mut mag = vec![0.0; h * w];
    let mut dir = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)
                - at(y - 1, x - 1)
                - 2.0 * at(y, x - 1)
                - at(y + 1, x - 1);
            let gy = at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)
                - at(y - 1, x - 1)
                - 2.0 * at(y - 1, x)
                - at(y - 1, x + 1);
            let p = (y * w as isize + x) as usize;
            mag[p] = gx.hypot(gy);
            dir[p] = gy.atan2(gx);
        }
    }

    // 2. Non-maximum suppression along the quantized gradient direction.
    let m_at = |y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            mag[(y * w as isize + x) as usize]
        }
    };
    let mut thin = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = (y * w as isize + x) as usize;
            let mut angle = dir[p].to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            // Neighbors along the gradient (+y is down, so 45° is the main
            // diagonal and 135° the anti-diagonal).
            let (a, b) = if !(22.5..157.5).contains(&angle) {
                (m_at(y, x - 1), m_at(y, x + 1))
            } else if angle < 67.5 {
                (m_at(y - 1, x - 1), m_at(y + 1, x + 1))
            } else if angle < 112.5 {
                (m_at(y - 1, x), m_at(y + 1, x))
            } else {
                (m_at(y - 1, x + 1), m_at(y + 1, x - 1))
            };
            if mag[p] >= a && mag[p] >= b {
                thin[p] = mag[p];
            }
        }
    }

    // 3. Hysteresis: flood from strong pixels through weak neighbors.
    let peak = thin.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut out = vec![0.0; h * w];
    if peak > 1e-12 {
        let (lo, hi) = (params.low * peak, params.high * peak);
        let mut stack: Vec<usize> = (0..h * w).filter(|&p| thin[p] >= hi).collect();
        for &p in &stack {
            out[p] = 1.0;
        }
        while let Some(p) = stack.pop() {
            let (y, x) = ((p / w) as isize, (p % w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (ny, nx) = (y + dy, x + dx);
                    if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                        continue;
                    }
                    let q = (ny * w as isize + nx) as usize;
                    if out[q] == 0.0 && thin[q] >= lo {
                        out[q] = 1.0;
                        stack.push(q);
                    }
                }
            }
        }
    }
    Tensor::new(g.shape(), out)
}
