//! Index-keyed parallel map. Output order follows the index, never the
//! schedule, so results are identical for every thread count.

/// Evaluates `f(0), ..., f(count - 1)` on up to `jobs` threads
/// (`0` means available parallelism).
pub(crate) fn map_indexed<T, F>(count: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if jobs != 1 && count > 1 {
            use rayon::prelude::*;
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                return pool.install(|| (0..count).into_par_iter().map(&f).collect());
            }
        }
    }
    let _ = jobs;
    (0..count).map(f).collect()
}
