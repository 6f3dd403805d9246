use std::time::Instant;

use pigano_core::training::{EpochRecord, Executor, Monitor};
use rayon::prelude::*;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "PIGANO_THREADS";

/// Runs jobs on a private thread pool; results keep job order, so reductions
/// over them are independent of the thread count.
pub struct Threads {
    pool: rayon::ThreadPool,
}

impl Threads {
    pub fn new(threads: usize) -> crate::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::Invalid(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }

    /// Thread count from the environment, else the available parallelism.
    pub fn from_env() -> crate::Result<Self> {
        let n = match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| crate::Error::Invalid(format!("{THREADS_ENV}={v:?} is not a positive integer")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Self::new(n)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Threads {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, jobs: usize, f: F) -> Vec<T> {
        if self.threads() == 1 {
            return (0..jobs).map(f).collect();
        }
        let f = &f;
        self.pool.install(|| (0..jobs).into_par_iter().map(f).collect())
    }
}

/// Wall clock for training records, with an optional per-epoch callback.
pub struct Clock<F = fn(&EpochRecord)> {
    start: Instant,
    on_epoch: Option<F>,
}

impl Clock {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            on_epoch: None,
        }
    }
}

impl Default for Clock {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: FnMut(&EpochRecord)> Clock<F> {
    pub fn with(on_epoch: F) -> Self {
        Self {
            start: Instant::now(),
            on_epoch: Some(on_epoch),
        }
    }
}

impl<F: FnMut(&EpochRecord)> Monitor for Clock<F> {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn on_epoch(&mut self, record: &EpochRecord) {
        if let Some(f) = &mut self.on_epoch {
            f(record);
        }
    }
}
