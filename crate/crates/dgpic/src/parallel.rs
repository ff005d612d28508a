//! Worker pool sized by `DGPIC_THREADS` and a deterministic gradient executor.

use dgpic_core::model::{Executor, GradientJob};
use rayon::prelude::*;

use crate::error::{DgpicError, Result};

pub const THREADS_ENV: &str = "DGPIC_THREADS";

/// Jobs summed together before partial sums are combined. Fixed so the
/// reduction tree, and therefore every bit of the result, does not depend on
/// the worker count.
pub const GRADIENT_CHUNK: usize = 4;

/// Reads `DGPIC_THREADS`; unset or `0` means one worker per core.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| DgpicError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
    }
}

pub struct Workers {
    pool: rayon::ThreadPool,
}

impl Workers {
    /// `threads == 0` picks the available parallelism.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| DgpicError::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(Workers { pool })
    }

    pub fn from_env() -> Result<Self> {
        Self::new(threads_from_env()?)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// Maps `f` over `items` in parallel, keeping input order.
    pub fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }
}

impl Executor for Workers {
    fn run(&self, jobs: usize, len: usize, job: &GradientJob<'_>) -> dgpic_core::Result<(Vec<f64>, Vec<f64>)> {
        let starts: Vec<usize> = (0..jobs).step_by(GRADIENT_CHUNK).collect();
        let partials = self.pool.install(|| {
            starts
                .par_iter()
                .map(|&s| -> dgpic_core::Result<(Vec<f64>, Vec<f64>)> {
                    let mut sum = vec![0.0; len];
                    let mut scratch = vec![0.0; len];
                    let mut losses = Vec::with_capacity(GRADIENT_CHUNK);
                    for i in s..(s + GRADIENT_CHUNK).min(jobs) {
                        scratch.fill(0.0);
                        losses.push(job(i, &mut scratch)?);
                        for (t, g) in sum.iter_mut().zip(&scratch) {
                            *t += g;
                        }
                    }
                    Ok((losses, sum))
                })
                .collect::<Vec<_>>()
        });
        let mut total = vec![0.0; len];
        let mut losses = Vec::with_capacity(jobs);
        for part in partials {
            let (l, g) = part?;
            losses.extend(l);
            for (t, v) in total.iter_mut().zip(&g) {
                *t += v;
            }
        }
        Ok((losses, total))
    }
}
