//! Data-parallel facade. With the `parallel` feature (the default) work is
//! spread over a rayon pool sized by `FREQSAL_THREADS` (unset or 0 means
//! one thread per core); without it the same entry points run plain loops.
//!
//! Both routes produce bitwise-identical results: outputs are either
//! collected in index order or written to disjoint chunks, never reduced in
//! a thread-dependent order. `map_indexed_seq` and `for_each_chunk_mut_seq`
//! are always-sequential twins so a single binary can benchmark both routes.

/// `(0..n).map(f)` collected in index order.
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pool().install(|| (0..n).into_par_iter().map(&f).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(n, f)
    }
}

/// Sequential twin of `map_indexed`.
pub fn map_indexed_seq<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Applies `f(chunk_index, chunk)` to consecutive `chunk`-sized pieces of
/// `data` (the last piece may be shorter).
pub fn for_each_chunk_mut<T: Send>(data: &mut [T], chunk: usize, f: impl Fn(usize, &mut [T]) + Sync) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pool().install(|| {
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for_each_chunk_mut_seq(data, chunk, f)
    }
}

/// Sequential twin of `for_each_chunk_mut`.
pub fn for_each_chunk_mut_seq<T: Send>(data: &mut [T], chunk: usize, f: impl Fn(usize, &mut [T]) + Sync) {
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Number of worker threads the parallel route uses.
pub fn thread_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        pool().current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(feature = "parallel")]
fn pool() -> &'static rayon::ThreadPool {
    use std::sync::OnceLock;
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("FREQSAL_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("rayon pool construction")
    })
}
