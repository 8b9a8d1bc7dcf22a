//! Data-parallel helpers.
//!
//! With the default `parallel` feature the maps below fan out over rayon;
//! without it they degrade to plain sequential iteration. Results are always
//! collected in input order, and every reduction in this crate folds the
//! collected vector sequentially, so outputs are bitwise identical whichever
//! path runs and however many threads exist.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when the `parallel` feature is enabled.
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
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

/// Maps `f` over indices `0..len`, in parallel when enabled.
pub fn map_indices<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Sequential twin of [`map_collect`], available unconditionally.
///
/// Exists so benchmarks can compare both paths in one binary.
pub fn map_collect_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Caps the global thread pool at `n` worker threads (0 = leave automatic).
///
/// Must run before the first parallel call; later calls are ignored because
/// the pool is already live. A no-op without the `parallel` feature.
pub fn configure_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        if n > 0 {
            // Ignore the error: the global pool may already be initialized.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
    }
}
