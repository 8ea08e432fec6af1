//! Data-parallel execution with a sequential fallback.
//!
//! Work items are indexed; each item derives its own RNG stream from the
//! index, so results do not depend on scheduling or thread count.

use serde::{Deserialize, Serialize};

use crate::error::{NujdError, Result};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "NUJD_THREADS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Rayon work-stealing pool (sequential when the `parallel` feature is off).
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether work actually runs on multiple threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; returns the lowest-index error.
pub fn try_map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(exec, n, f).into_iter().collect()
}

/// Sizes the global pool from `NUJD_THREADS` when set. Returns the thread
/// count in effect (1 without the `parallel` feature). Calling it after the
/// pool has been initialized keeps the existing pool.
pub fn configure_threads() -> Result<usize> {
    let requested = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            NujdError::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
        })?),
        Err(_) => None,
    };
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = requested {
            if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
                log::debug!("thread pool already initialized");
            }
        }
        Ok(rayon::current_num_threads())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = requested;
        Ok(1)
    }
}
