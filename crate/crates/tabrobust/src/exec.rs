//! Thread-pool executor. Results are collected in index order, so output
//! does not depend on the worker count.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use tabrobust_core::exec::Executor;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "TABROBUST_THREADS";

pub struct RayonExecutor {
    pool: ThreadPool,
}

impl RayonExecutor {
    /// A pool of `threads` workers; 0 picks one per logical CPU.
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        Ok(Self { pool: ThreadPoolBuilder::new().num_threads(threads).build()? })
    }

    /// Worker count from [`THREADS_ENV`] when set to an integer, else one per CPU.
    pub fn from_env() -> Result<Self, rayon::ThreadPoolBuildError> {
        Self::new(threads_from_env().unwrap_or(0))
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok()
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().with_min_len(1).map(f).collect())
    }
}
