//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature (default) the work is spread over a rayon
//! pool; without it everything runs sequentially. Reductions downstream
//! of these maps always fold in input order, so results are identical
//! for any worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map in input order, in parallel when the feature is enabled.
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
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

/// Always-sequential map, for baselines and benchmarks.
pub fn seq_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Runs `f` with at most `jobs` worker threads. `jobs = 0` keeps the
/// default pool (one thread per core). Without the `parallel` feature
/// the bound is irrelevant and `f` just runs.
pub fn run_with_jobs<R, F>(jobs: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if jobs == 0 {
            f()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .expect("thread pool construction");
            pool.install(f)
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        f()
    }
}
