//! Sequential year-by-year fit of drift and volatility to an observed
//! top-income-share series, given an exogenous resetting-rate series.
//!
//! Year 0 is fitted against the stationary law at the first resetting rate.
//! Each later year propagates the previous year's population one year and
//! searches the growth parameters that reproduce that year's share. The whole
//! sequence is repeated over independent replicas.

mod fit;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::ensemble::{self, EnsembleError, InitMode, DEFAULT_DT};
use crate::measures::{top_share, MeasureError};
use crate::model::{classify_regime, ModelError, ModelParams, RegimeLabel};
use crate::rng::{self, domain};
use crate::stats;

pub use fit::{fit_initial, fit_year, initial_state, FitConfig, YearFit};

/// Resamples used for the confidence bands.
pub const BOOTSTRAP_RESAMPLES: usize = 2000;
/// Largest fraction of replicas allowed to fail in any one year.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("invalid calibration input: {0}")]
    InvalidInput(String),
    #[error("optimizer failure in year index {year_index}: objective {objective:.3e} above floor {floor:.3e}")]
    OptimizerFailure {
        year_index: usize,
        objective: f64,
        floor: f64,
    },
    #[error("{failed} of {reps} replicas failed in year {year}")]
    TooManyFailures { year: i32, failed: usize, reps: usize },
    #[error("observed series is constant")]
    ConstantObserved,
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

impl CalibrationError {
    /// True for failures of the numerical search rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CalibrationError::OptimizerFailure { .. } | CalibrationError::TooManyFailures { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationInput {
    pub years: Vec<i32>,
    /// Resetting rate per year, 1/year.
    pub r_hat: Vec<f64>,
    /// Observed top share per year, fraction.
    pub target_share: Vec<f64>,
    /// Tail fraction of the share, e.g. 0.01 for the top 1%.
    pub percentile: f64,
    /// Simulated population size.
    pub n: usize,
    pub reps: usize,
    /// Step size, years.
    pub dt: f64,
    pub fit: FitConfig,
}

impl CalibrationInput {
    pub fn new(years: Vec<i32>, r_hat: Vec<f64>, target_share: Vec<f64>, percentile: f64) -> Self {
        Self {
            years,
            r_hat,
            target_share,
            percentile,
            n: 100_000,
            reps: 25,
            dt: DEFAULT_DT,
            fit: FitConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: String| Err(CalibrationError::InvalidInput(m));
        let len = self.years.len();
        if len < 2 {
            return bad(format!("need at least 2 years, got {len}"));
        }
        if self.r_hat.len() != len || self.target_share.len() != len {
            return bad(format!(
                "series lengths differ: {} years, {} rates, {} shares",
                len,
                self.r_hat.len(),
                self.target_share.len()
            ));
        }
        if let Some(w) = self.years.windows(2).find(|w| w[1] != w[0] + 1) {
            return bad(format!("years not consecutive at {} -> {}", w[0], w[1]));
        }
        for (year, &r) in self.years.iter().zip(&self.r_hat) {
            if !(r > 0.0 && r < 1.0) {
                return bad(format!("resetting rate {r} in {year} outside (0, 1)"));
            }
        }
        for (year, &s) in self.years.iter().zip(&self.target_share) {
            if !(s > 0.0 && s < 1.0) {
                return bad(format!("share {s} in {year} outside (0, 1)"));
            }
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return bad(format!("percentile {} outside (0, 1)", self.percentile));
        }
        if (self.n as f64) * self.percentile < 1.0 {
            return bad(format!("population {} too small for percentile {}", self.n, self.percentile));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        Ok(())
    }
}

/// One replica's fits, one per year.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaTrace {
    pub seed: u64,
    pub fits: Vec<YearFit>,
}

/// Aggregated estimates of one year. Bands are 95% percentile bootstrap
/// intervals of the replica mean.
#[derive(Debug, Clone, PartialEq)]
pub struct YearEstimate {
    pub year: i32,
    pub mu_hat: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub sigma_hat: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub r_hat: f64,
    /// Band of the first-moment threshold `mu`.
    pub r1_lo: f64,
    pub r1_hi: f64,
    /// Second-moment threshold `2 mu + sigma^2` at the mean estimates, and its band.
    pub r2_hat: f64,
    pub r2_lo: f64,
    pub r2_hi: f64,
    pub fitted_share: f64,
    pub observed_share: f64,
    pub regime: RegimeLabel,
    pub failed_replicas: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub estimates: Vec<YearEstimate>,
    pub r_squared: f64,
    pub percentile: f64,
    pub reps: usize,
    pub n: usize,
    pub dt: f64,
    pub master_seed: u64,
    pub replicas: Vec<ReplicaTrace>,
}

/// Coefficient of determination of `fitted` against `observed`.
pub fn r_squared(observed: &[f64], fitted: &[f64]) -> Result<f64, CalibrationError> {
    if observed.len() != fitted.len() || observed.len() < 2 {
        return Err(CalibrationError::InvalidInput(format!(
            "need two equal-length series of at least 2 values, got {} and {}",
            observed.len(),
            fitted.len()
        )));
    }
    let m = stats::mean(observed);
    let ss_tot: f64 = observed.iter().map(|o| (o - m) * (o - m)).sum();
    if ss_tot == 0.0 {
        return Err(CalibrationError::ConstantObserved);
    }
    let ss_res: f64 = observed
        .iter()
        .zip(fitted)
        .map(|(o, f)| (o - f) * (o - f))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Runs every replica of the calibration.
pub fn calibrate(input: &CalibrationInput, master_seed: u64) -> Result<CalibrationResult, CalibrationError> {
    input.validate()?;
    let replicas: Vec<ReplicaTrace> = (0..input.reps as u64)
        .into_par_iter()
        .map(|k| run_replica(input, rng::derive_path(master_seed, &[domain::REPLICA, k])))
        .collect::<Result<_, _>>()?;
    let mut estimates = Vec::with_capacity(input.years.len());
    for (t, &year) in input.years.iter().enumerate() {
        let ok: Vec<&YearFit> = replicas
            .iter()
            .map(|rep| &rep.fits[t])
            .filter(|f| !f.failed(&input.fit))
            .collect();
        let failed = input.reps - ok.len();
        if ok.is_empty() || failed as f64 > MAX_FAILED_FRACTION * input.reps as f64 {
            return Err(CalibrationError::TooManyFailures {
                year,
                failed,
                reps: input.reps,
            });
        }
        let mus: Vec<f64> = ok.iter().map(|f| f.mu).collect();
        let sigmas: Vec<f64> = ok.iter().map(|f| f.sigma).collect();
        let shares: Vec<f64> = ok.iter().map(|f| f.share).collect();
        let mu_hat = stats::mean(&mus);
        let sigma_hat = stats::mean(&sigmas);
        let bands = bootstrap_bands(
            &mus,
            &sigmas,
            rng::derive_path(master_seed, &[domain::BOOTSTRAP, t as u64]),
        );
        let r_hat = input.r_hat[t];
        let params = ModelParams::new(mu_hat, sigma_hat, r_hat, 1.0)?;
        estimates.push(YearEstimate {
            year,
            mu_hat,
            mu_lo: bands.mu.0,
            mu_hi: bands.mu.1,
            sigma_hat,
            sigma_lo: bands.sigma.0,
            sigma_hi: bands.sigma.1,
            r_hat,
            r1_lo: bands.mu.0,
            r1_hi: bands.mu.1,
            r2_hat: 2.0 * mu_hat + sigma_hat * sigma_hat,
            r2_lo: bands.r2.0,
            r2_hi: bands.r2.1,
            fitted_share: stats::mean(&shares),
            observed_share: input.target_share[t],
            regime: classify_regime(&params),
            failed_replicas: failed,
        });
    }
    let fitted: Vec<f64> = estimates.iter().map(|e| e.fitted_share).collect();
    let r_squared = r_squared(&input.target_share, &fitted)?;
    Ok(CalibrationResult {
        estimates,
        r_squared,
        percentile: input.percentile,
        reps: input.reps,
        n: input.n,
        dt: input.dt,
        master_seed,
        replicas,
    })
}

fn run_replica(input: &CalibrationInput, seed: u64) -> Result<ReplicaTrace, CalibrationError> {
    let first = fit::search_initial(
        input.r_hat[0],
        input.target_share[0],
        input.percentile,
        input.n,
        seed,
        &input.fit,
    )?;
    let mut state = initial_state(&first, input.r_hat[0], input.n, input.dt, seed)?;
    let mut fits = Vec::with_capacity(input.years.len());
    fits.push(first);
    for t in 0..input.years.len() - 1 {
        let fit = fit::search_year(
            &mut state,
            input.r_hat[t],
            input.target_share[t + 1],
            input.percentile,
            &input.fit,
        )?;
        fits.push(fit);
    }
    Ok(ReplicaTrace { seed, fits })
}

struct Bands {
    mu: (f64, f64),
    sigma: (f64, f64),
    r2: (f64, f64),
}

fn bootstrap_bands(mus: &[f64], sigmas: &[f64], seed: u64) -> Bands {
    let m = mus.len();
    let mut rng = rng::stream(seed);
    let mut bm = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut bs = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut br = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let (mut sm, mut ss) = (0.0, 0.0);
        for _ in 0..m {
            let i = rng.random_range(0..m);
            sm += mus[i];
            ss += sigmas[i];
        }
        let (mu, sigma) = (sm / m as f64, ss / m as f64);
        bm.push(mu);
        bs.push(sigma);
        br.push(2.0 * mu + sigma * sigma);
    }
    let band = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (stats::quantile_sorted(v, 0.025), stats::quantile_sorted(v, 0.975))
    };
    Bands {
        mu: band(&mut bm),
        sigma: band(&mut bs),
        r2: band(&mut br),
    }
}

/// Top-share path of a population started from the stationary law at
/// `r_hat[0]` and propagated one year at a time under fixed growth
/// parameters and the given yearly resetting rates. Entry `t` is the share
/// at the start of year `t`.
pub fn simulate_share_path(
    mu: f64,
    sigma: f64,
    r_hat: &[f64],
    percentile: f64,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<f64>, CalibrationError> {
    let Some(&r0) = r_hat.first() else {
        return Ok(Vec::new());
    };
    let seed = rng::derive_seed(seed, domain::TRUTH);
    let params = ModelParams::new(mu, sigma, r0, 1.0)?;
    let mut state = ensemble::init_population(params, n, InitMode::Stationary, seed)?.with_dt(dt)?;
    let mut shares = Vec::with_capacity(r_hat.len());
    shares.push(top_share(state.incomes(), percentile)?);
    for &r in &r_hat[..r_hat.len() - 1] {
        state.set_params(state.params().with_rate(r)?)?;
        ensemble::propagate(&mut state, 1.0, &[])?;
        shares.push(top_share(state.incomes(), percentile)?);
    }
    Ok(shares)
}
