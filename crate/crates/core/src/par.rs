//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) `Execution::Parallel` runs on the rayon
//! pool; without it every execution is sequential. Results keep input order either way.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// The execution actually used, given the compiled features.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

impl std::str::FromStr for Execution {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "sequential" | "seq" => Ok(Execution::Sequential),
            "parallel" | "par" => Ok(Execution::Parallel),
            other => Err(crate::Error::validation(format!(
                "unknown execution {other:?} (expected sequential|parallel)"
            ))),
        }
    }
}

pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec.effective() {
        Execution::Sequential => items.iter().map(f).collect(),
        Execution::Parallel => parallel_map(items, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T: Sync, R: Send, F: Fn(&T) -> R + Sync + Send>(items: &[T], f: F) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T: Sync, R: Send, F: Fn(&T) -> R + Sync + Send>(items: &[T], f: F) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Runs `f` with parallel maps limited to `jobs` worker threads. `jobs = 1` forces
/// sequential execution.
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce(Execution) -> R + Send) -> crate::Result<R> {
    if jobs == 0 {
        return Err(crate::Error::validation("jobs must be at least 1"));
    }
    if jobs == 1 || !cfg!(feature = "parallel") {
        return Ok(f(Execution::Sequential));
    }
    run_in_pool(jobs, f)
}

#[cfg(feature = "parallel")]
fn run_in_pool<R: Send>(jobs: usize, f: impl FnOnce(Execution) -> R + Send) -> crate::Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| crate::Error::validation(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(|| f(Execution::Parallel)))
}

#[cfg(not(feature = "parallel"))]
fn run_in_pool<R: Send>(_jobs: usize, f: impl FnOnce(Execution) -> R + Send) -> crate::Result<R> {
    Ok(f(Execution::Sequential))
}
