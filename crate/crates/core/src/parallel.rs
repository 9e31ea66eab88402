//! Thread-pool plumbing shared by the row-parallel operations.
//!
//! Every parallel operation in this crate writes its results into slots
//! indexed by row (or trial) and reduces in index order, so output is
//! bit-identical for any worker count.

use crate::{Error, Result};

/// Resolve a requested worker count; `0` means all available cores.
pub fn resolve_threads(threads: usize) -> usize {
    if threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        threads
    }
}

/// Run `f` inside a dedicated rayon pool with `threads` workers.
pub fn with_threads<T, F>(threads: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_threads(threads))
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}
