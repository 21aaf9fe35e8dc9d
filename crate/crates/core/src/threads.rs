//! Worker-thread configuration.

use crate::error::{Error, Result};

/// Caps the number of worker threads; unset means 1.
pub const THREADS_ENV: &str = "VOLO_THREADS";

/// Thread count requested by the environment.
pub fn requested_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`]. Results do not
/// depend on the thread count. A pool that already exists is kept.
pub fn init_thread_pool() -> Result<usize> {
    let n = requested_threads()?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(rayon::current_num_threads())
}
