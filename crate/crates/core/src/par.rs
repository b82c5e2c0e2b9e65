//! Thin facade over rayon with a sequential fallback.
//!
//! All data parallelism in this crate goes through these helpers so that a
//! build without the `parallel` feature degrades to plain iterators. Results
//! are collected in index order and reductions are never reordered, so the
//! two builds (and any worker count) produce bit-identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Fallible variant of [`map_indexed`]; the first error wins.
pub fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
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

/// Always-sequential twin of [`map_indexed`], kept available in every build
/// so benchmarks can compare the two code paths directly.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: FnMut(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Runs `job` inside a dedicated pool of `workers` threads. Without the
/// `parallel` feature the job runs inline and `workers` is ignored.
pub fn with_workers<R, F>(workers: usize, job: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    assert!(workers >= 1, "worker count must be at least 1");
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build worker pool")
            .install(job)
    }
    #[cfg(not(feature = "parallel"))]
    {
        job()
    }
}
