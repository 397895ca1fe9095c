//! Worker pool shared by the ensemble runners.
//!
//! `EPRLAB_THREADS` caps the worker count. Results are always gathered in
//! path-index order, so outputs do not depend on the number of workers.

use std::sync::OnceLock;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::Result;

pub const THREADS_ENV: &str = "EPRLAB_THREADS";

fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = ThreadPoolBuilder::new();
        if let Some(n) = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            builder = builder.num_threads(n);
        }
        builder.build().expect("worker pool")
    })
}

pub fn worker_count() -> usize {
    pool().current_num_threads()
}

/// Evaluates `f(i)` for `i in 0..n` on the pool and returns results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    pool().install(|| (0..n).into_par_iter().map(&f).collect())
}
