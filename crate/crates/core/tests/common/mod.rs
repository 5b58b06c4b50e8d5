//! Shared helpers for integration tests: deterministic tensor generators
//! and small utilities kept apart from the library code.
#![allow(dead_code)]

use freqsal_core::{ParamStore, Tensor};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    random_tensor_in(shape, -2.0, 2.0, seed)
}

pub fn random_tensor_in(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Nudges every parameter by uniform noise so finite differences probe a
/// generic point instead of a symmetric initialization.
pub fn jitter_params(store: &mut ParamStore, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for v in store.value_mut(id).data_mut() {
            *v += rng.random_range(-scale..scale);
        }
    }
}
