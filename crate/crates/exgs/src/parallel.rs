//! Worker pool shared by every parallel stage.
//!
//! `EXGS_THREADS` caps the worker count (unset or invalid falls back to the
//! machine default). All parallel algorithms in this crate produce results
//! that are merged in a fixed order, so output bytes never depend on the
//! worker count; the variable only trades latency for CPU.

use once_cell::sync::Lazy;
use rayon::ThreadPool;

static POOL: Lazy<ThreadPool> = Lazy::new(|| {
    let mut builder = rayon::ThreadPoolBuilder::new().thread_name(|i| format!("exgs-worker-{i}"));
    if let Ok(raw) = std::env::var("EXGS_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => builder = builder.num_threads(n),
            _ => log::warn!("ignoring invalid EXGS_THREADS value {raw:?}"),
        }
    }
    builder.build().expect("worker pool construction cannot fail")
});

/// Runs `f` inside the shared pool so nested rayon iterators use it.
pub fn run<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    POOL.install(f)
}
