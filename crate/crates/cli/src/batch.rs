//! Concurrent processing of independent inputs.
//!
//! Each image runs its own pipeline sequentially; images run side by side
//! on a pool capped by `MORSEGRID_THREADS`. A lone image gets the parallel
//! kernels instead. Results come back in input order.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use morsegrid::Execution;

pub const THREADS_VAR: &str = "MORSEGRID_THREADS";

/// Thread cap from the environment; `None` leaves the choice to rayon.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context(THREADS_VAR),
        Ok(s) if s.trim().is_empty() => Ok(None),
        Ok(s) => {
            let n: usize = s
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_VAR}={s:?} is not a thread count"))?;
            anyhow::ensure!(n > 0, "{THREADS_VAR} must be at least 1");
            Ok(Some(n))
        }
    }
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.with_context(|| path.display().to_string())
}

#[cfg(feature = "parallel")]
pub fn run<T, F>(inputs: &[PathBuf], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Path, Execution) -> Result<T> + Sync,
{
    use rayon::prelude::*;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("cannot start the worker pool")?;
    pool.install(|| {
        if let [only] = inputs {
            return Ok(vec![with_path(only, f(only, Execution::Parallel))?]);
        }
        inputs
            .par_iter()
            .map(|p| with_path(p, f(p, Execution::Sequential)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
pub fn run<T, F>(inputs: &[PathBuf], f: F) -> Result<Vec<T>>
where
    F: Fn(&Path, Execution) -> Result<T>,
{
    thread_cap()?;
    inputs
        .iter()
        .map(|p| with_path(p, f(p, Execution::Sequential)))
        .collect()
}
