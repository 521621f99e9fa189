//! Geometric Brownian motion with stochastic resetting as a model of income
//! dynamics: closed-form stationary results, a parallel population simulator,
//! inequality and mobility measures, and year-by-year calibration to observed
//! income shares.

pub mod calibration;
pub mod ensemble;
pub mod io;
pub mod measures;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod stats;

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool
/// when `workers` is `None`. Results never depend on the worker count.
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> Result<R, rayon::ThreadPoolBuildError>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?;
            Ok(pool.install(f))
        }
    }
}
