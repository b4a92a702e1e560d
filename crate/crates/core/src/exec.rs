//! Parallel execution helpers.
//!
//! Hot loops (particles within a sampler stage, per-plan statistics) run
//! through these functions. With the `parallel` feature they dispatch to
//! rayon; without it they fall back to plain iterators. Both paths produce
//! results in input order, so output never depends on the schedule or the
//! worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items` with the element index, collecting in input order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(usize, &T) -> R,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Maps `f` over the range `0..n`, collecting in index order.
#[cfg(feature = "parallel")]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Sequential variant of [`map_range`], always available. Benchmarks use it
/// to compare the data-parallel path against single-threaded execution
/// within one build.
pub fn map_range_seq<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}
