//! Data-parallel loop helpers.
//!
//! With the `parallel` feature the helpers fan out over rayon's global pool
//! (or whatever pool the caller has `install`ed); without it they run the
//! same closures sequentially. Every helper partitions work into fixed-size
//! chunks that do not depend on the worker count, and reductions combine the
//! per-chunk partials in index order, so results are bit-identical for any
//! number of threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used for elementwise loops and reductions.
pub const CHUNK: usize = 4096;

/// Applies `f(chunk_index, chunk)` to consecutive `len`-sized chunks.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(len).enumerate().for_each(|(i, c)| f(i, c));
}

/// Elementwise `out[i] = f(i)`.
pub fn fill_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Send + Sync,
{
    for_each_chunk_mut(out, CHUNK, |ci, chunk| {
        let base = ci * CHUNK;
        for (k, o) in chunk.iter_mut().enumerate() {
            *o = f(base + k);
        }
    });
}

/// Elementwise in-place update `f(i, &mut out[i])`.
pub fn update_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize, &mut f64) + Send + Sync,
{
    for_each_chunk_mut(out, CHUNK, |ci, chunk| {
        let base = ci * CHUNK;
        for (k, o) in chunk.iter_mut().enumerate() {
            f(base + k, o);
        }
    });
}

/// Deterministic sum of `f(i)` for `i in 0..n`.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Send + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partial = |c: usize| {
        let end = ((c + 1) * CHUNK).min(n);
        (c * CHUNK..end).map(&f).sum::<f64>()
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = (0..n_chunks).into_par_iter().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = (0..n_chunks).map(partial).collect();
    partials.into_iter().sum()
}

/// Deterministic maximum of `f(i)` for `i in 0..n` (0 for empty input).
pub fn max_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Send + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partial = |c: usize| {
        let end = ((c + 1) * CHUNK).min(n);
        (c * CHUNK..end).map(&f).fold(0.0_f64, f64::max)
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = (0..n_chunks).into_par_iter().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = (0..n_chunks).map(partial).collect();
    partials.into_iter().fold(0.0, f64::max)
}

/// Runs two closures, concurrently when the `parallel` feature is on.
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::join(a, b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (a(), b())
    }
}

/// Runs `f` on a dedicated pool of `threads` workers. Without the
/// `parallel` feature this just calls `f`.
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    F: FnOnce() -> R + Send,
    R: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Workers available to the helpers (1 without the `parallel` feature).
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_sequential_order() {
        let n = 3 * CHUNK + 17;
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let mut expect = 0.0;
        for c in 0..n.div_ceil(CHUNK) {
            let end = ((c + 1) * CHUNK).min(n);
            expect += (c * CHUNK..end).map(f).sum::<f64>();
        }
        assert_eq!(sum_indexed(n, f).to_bits(), expect.to_bits());
    }

    #[test]
    fn fill_and_max() {
        let mut v = vec![0.0; CHUNK + 5];
        fill_indexed(&mut v, |i| i as f64);
        assert_eq!(v[CHUNK + 4], (CHUNK + 4) as f64);
        assert_eq!(max_indexed(v.len(), |i| v[i]), (CHUNK + 4) as f64);
        assert_eq!(max_indexed(0, |_| 1.0), 0.0);
    }
}
