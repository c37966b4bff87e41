//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these fan out over rayon's global
//! pool; without it they run sequentially. Reductions always sum fixed-size
//! chunks in index order, so results are bit-identical between the two
//! builds and across thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used by [`chunked_sum`].
pub const CHUNK: usize = 512;

/// `items.iter().map(f).collect()`, in parallel when enabled.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Maps `0..n` through `f`, in parallel when enabled.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sums `f(i)` over `0..n` into a vector accumulator of length `width`.
///
/// `f` adds its contribution for index `i` into the provided buffer. The
/// partial sums for consecutive chunks of [`CHUNK`] indices are combined in
/// ascending chunk order.
pub fn chunked_sum<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = |c: usize| {
        let mut acc = vec![0.0; width];
        let end = ((c + 1) * CHUNK).min(n);
        for i in c * CHUNK..end {
            f(i, &mut acc);
        }
        acc
    };
    let parts: Vec<Vec<f64>> = map_range(chunks, partial);
    let mut total = vec![0.0; width];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}
