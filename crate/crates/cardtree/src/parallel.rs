//! Data-parallel map helper.
//!
//! With the `parallel` feature the map runs on the rayon pool; without it the
//! same code runs sequentially. Results are collected in index order in both
//! cases, so callers that reduce the output in order get identical floating
//! point results regardless of thread count.

#[cfg(feature = "parallel")]
pub(crate) fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).map(f).collect()
}
