//! Minimal worker-pool helper.
//!
//! Work is always split into the same index set regardless of the worker
//! count and results come back in index order, so any reduction the caller
//! performs afterwards is independent of `threads`.

/// Evaluate `f(0..n)` and collect in index order.
///
/// `threads == 1` runs inline on the caller's thread. `threads == 0` uses the
/// default pool size. Without the `parallel` feature everything runs inline.
pub fn map_indexed<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads != 1 && n > 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
            if let Ok(pool) = pool {
                return pool.install(|| (0..n).into_par_iter().map(&f).collect());
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    (0..n).map(f).collect()
}
