//! Criterion benchmarks comparing the rayon route against the forced
//! sequential route on the spectral mixing core and batched model forward.

use criterion::{criterion_group, criterion_main, Criterion};

fn bench_placeholder(_c: &mut Criterion) {
    // Filled in once the model and mixing ops land.
}

criterion_group!(benches, bench_placeholder);
criterion_main!(benches);
