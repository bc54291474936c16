//! Data-parallel map helpers.
//!
//! With the `parallel` feature (default) replicate loops run on rayon; without
//! it the same loops run sequentially. Outputs are collected in index order and
//! every replicate owns its random stream, so both modes produce identical
//! results.

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
