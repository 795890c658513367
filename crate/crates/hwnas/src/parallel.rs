use anyhow::{Context, Result};
use rayon::prelude::*;

use hwnas_core::Executor;

/// Executor backed by a dedicated rayon pool. Results keep input order, so
/// the worker count never changes an outcome.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `jobs == 0` lets rayon pick the number of threads.
    pub fn new(jobs: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("starting worker pool")?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}
