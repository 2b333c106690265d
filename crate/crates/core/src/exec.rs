//! Worker-count plumbing shared by every batch operation.
//!
//! All corpus-scale loops in this crate funnel through [`map_ordered`] so the
//! `--workers` knob behaves identically everywhere:
//!
//! * `workers == 1` runs a plain sequential loop (also the only mode when the
//!   crate is built without the `parallel` feature),
//! * `workers == 0` uses the global rayon pool (one thread per core),
//! * `workers == n` runs on a dedicated n-thread pool.
//!
//! The map preserves input order, so downstream reductions see items in the
//! same sequence regardless of the worker count. Callers that aggregate
//! floating-point values must fold the returned vector sequentially; that
//! convention is what makes batch output byte-identical across worker counts.

/// Number of worker threads for a batch operation. `0` means "all cores".
pub const AUTO_WORKERS: usize = 0;

/// Apply `f` to every item, returning results in input order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    use rayon::prelude::*;

    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let run = || items.par_iter().map(&f).collect();
    if workers == AUTO_WORKERS {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build worker pool")
            .install(run)
    }
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, U, F>(items: &[T], _workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    items.iter().map(f).collect()
}

/// Like [`map_ordered`] but for fallible `f`; the first error (in input
/// order) wins.
pub fn try_map_ordered<T, U, F>(items: &[T], workers: usize, f: F) -> crate::Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> crate::Result<U> + Sync,
{
    map_ordered(items, workers, f).into_iter().collect()
}
