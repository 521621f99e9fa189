//! Inequality against immobility across resetting rates.

use rayon::prelude::*;

use super::{earnings_elasticity, gini, MeasureError};
use crate::ensemble::{self, InitMode, DEFAULT_DT};
use crate::model::ModelParams;
use crate::rng::{self, domain};
use crate::stats;

/// Tukey boxplot summary: quartiles, 1.5 IQR whiskers, and the points beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct Boxplot {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

impl Boxplot {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = stats::quantile_sorted(&sorted, 0.25);
        let median = stats::quantile_sorted(&sorted, 0.5);
        let q3 = stats::quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside = || sorted.iter().copied().filter(|&v| v >= fence_lo && v <= fence_hi);
        let whisker_lo = inside().next().unwrap_or(q1);
        let whisker_hi = inside().last().unwrap_or(q3);
        let outliers = sorted
            .iter()
            .copied()
            .filter(|&v| v < fence_lo || v > fence_hi)
            .collect();
        Self {
            q1,
            median,
            q3,
            whisker_lo,
            whisker_hi,
            outliers,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatsbyPoint {
    pub r: f64,
    pub ee_median: f64,
    pub gini: Boxplot,
    pub gini_values: Vec<f64>,
    pub ee_values: Vec<f64>,
}

impl GatsbyPoint {
    pub fn gini_median(&self) -> f64 {
        self.gini.median
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// Population size per realization.
    pub n: usize,
    /// Realizations per resetting rate.
    pub reps: usize,
    /// Lag of the elasticity, years.
    pub delta: f64,
    pub dt: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            reps: 100,
            delta: 10.0,
            dt: DEFAULT_DT,
        }
    }
}

/// For each rate in `r_grid`, simulates `reps` stationary populations over
/// `delta` years and summarizes the end-of-window Gini and the elasticity
/// between the window's endpoints.
///
/// Realization `k` at rate `r` is seeded from `(seed, r, k)` alone.
pub fn gatsby_sweep(
    base: &ModelParams,
    r_grid: &[f64],
    cfg: &SweepConfig,
    seed: u64,
) -> Result<Vec<GatsbyPoint>, MeasureError> {
    if let Some(&r) = r_grid.iter().find(|&&r| !(r > 0.0 && r <= 0.2)) {
        return Err(MeasureError::BadGrid(format!(
            "resetting rate {r} outside (0, 0.2]"
        )));
    }
    if cfg.reps < 2 {
        return Err(MeasureError::TooFew {
            need: 2,
            got: cfg.reps,
        });
    }
    let cells: Vec<(usize, usize)> = (0..r_grid.len())
        .flat_map(|i| (0..cfg.reps).map(move |k| (i, k)))
        .collect();
    let results: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&(i, k)| {
            let r = r_grid[i];
            let cell_seed = rng::derive_path(seed, &[domain::CELL, r.to_bits(), k as u64]);
            realization(base, r, cfg, cell_seed)
        })
        .collect::<Result<_, _>>()?;
    Ok(r_grid
        .iter()
        .zip(results.chunks(cfg.reps))
        .map(|(&r, cell)| {
            let gini_values: Vec<f64> = cell.iter().map(|c| c.0).collect();
            let ee_values: Vec<f64> = cell.iter().map(|c| c.1).collect();
            GatsbyPoint {
                r,
                ee_median: stats::median(&ee_values),
                gini: Boxplot::from_values(&gini_values),
                gini_values,
                ee_values,
            }
        })
        .collect())
}

fn realization(
    base: &ModelParams,
    r: f64,
    cfg: &SweepConfig,
    seed: u64,
) -> Result<(f64, f64), MeasureError> {
    let params = base.with_rate(r)?;
    let mut state =
        ensemble::init_population(params, cfg.n, InitMode::Stationary, seed)?.with_dt(cfg.dt)?;
    let start = state.incomes().to_vec();
    ensemble::propagate(&mut state, cfg.delta, &[])?;
    let end = state.incomes();
    Ok((gini(end)?, earnings_elasticity(&start, end)?))
}
