//! Deterministic synthetic RGB-T samples. Ground truth is a union of
//! random filled ellipses; the two modalities render it with their own
//! contrast and noise so a model must actually fuse them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

/// One paired training record.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub rgb: Tensor,
    pub thermal: Tensor,
    pub gt: Tensor,
}

/// Binary mask of 1–3 random filled ellipses, shape [1, size, size].
pub fn blob_mask(size: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(1..=3usize);
    let s = size as f64;
    let blobs: Vec<(f64, f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            let cy = rng.random_range(0.25 * s..0.75 * s);
            let cx = rng.random_range(0.25 * s..0.75 * s);
            let ry = rng.random_range(0.10 * s..0.28 * s);
            let rx = rng.random_range(0.10 * s..0.28 * s);
            let phi = rng.random_range(0.0..std::f64::consts::PI);
            (cy, cx, ry, rx, phi)
        })
        .collect();
    Tensor::from_fn(&[1, size, size], |i| {
        let (y, x) = ((i / size) as f64 + 0.5, (i % size) as f64 + 0.5);
        let inside = blobs.iter().any(|&(cy, cx, ry, rx, phi)| {
            let (dy, dx) = (y - cy, x - cx);
            let u = dx * phi.cos() + dy * phi.sin();
            let v = -dx * phi.sin() + dy * phi.cos();
            (u / rx) * (u / rx) + (v / ry) * (v / ry) <= 1.0
        });
        if inside { 1.0 } else { 0.0 }
    })
}

/// Renders the mask into both modalities: per-channel foreground and
/// background levels plus small uniform noise, all clamped to [0,1].
pub fn sample(size: usize, seed: u64) -> SynthSample {
    let gt = blob_mask(size, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x53_59_4e_54);
    let plane = |fg: f64, bg: f64, noise: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..size * size)
            .map(|p| {
                let base = if gt.data()[p] > 0.5 { fg } else { bg };
                (base + rng.random_range(-noise..noise)).clamp(0.0, 1.0)
            })
            .collect()
    };
    let mut rgb_data = Vec::with_capacity(3 * size * size);
    for _ in 0..3 {
        let fg = rng.random_range(0.55..0.9);
        let bg = rng.random_range(0.1..0.45);
        rgb_data.extend(plane(fg, bg, 0.05, &mut rng));
    }
    let rgb = Tensor::new(&[3, size, size], rgb_data).expect("rgb plane arithmetic");
    let fg = rng.random_range(0.7..0.9);
    let bg = rng.random_range(0.1..0.3);
    let thermal =
        Tensor::new(&[1, size, size], plane(fg, bg, 0.02, &mut rng)).expect("thermal plane");
    SynthSample { rgb, thermal, gt }
}
