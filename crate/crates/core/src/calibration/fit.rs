//! Per-year parameter searches.

use super::CalibrationError;
use crate::ensemble::{InitMode, PopulationState};
use crate::measures::top_share;
use crate::model::{self, ModelParams};
use crate::numerics::nelder_mead;
use crate::rng::{self, domain};

/// Search settings shared by the initial and the yearly fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Half-width of the yearly search box in `mu`, 1/year.
    pub trust_mu: f64,
    /// Half-width of the yearly search box in `sigma`, 1/sqrt(year).
    pub trust_sigma: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    /// Smallest admissible `sigma`.
    pub sigma_min: f64,
    /// Largest admissible variance rate `sigma^2`, 1/year.
    pub sigma2_max: f64,
    /// Points per axis of the yearly coarse grid (odd, so the box centre is on it).
    pub grid: usize,
    /// Points per axis of the initial global grid.
    pub initial_grid: usize,
    /// Simplex tolerance relative to the box half-widths.
    pub xtol: f64,
    pub max_evals: usize,
    /// Weight of the squared, half-width-scaled distance to the box centre.
    pub penalty: f64,
    /// Objective values above this mark the fit as failed.
    pub floor: f64,
    /// Centre of the initial search, `(mu, sigma2)`.
    pub anchor: (f64, f64),
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            trust_mu: 0.02,
            trust_sigma: 0.02,
            mu_min: -0.1,
            mu_max: 0.2,
            sigma_min: 1e-3,
            sigma2_max: 0.2,
            grid: 5,
            initial_grid: 13,
            xtol: 1e-4,
            max_evals: 60,
            penalty: 1e-6,
            floor: 4e-4,
            anchor: (0.02, 0.02),
        }
    }
}

impl FitConfig {
    pub fn sigma_max(&self) -> f64 {
        self.sigma2_max.sqrt()
    }

    fn validate(&self) -> Result<(), CalibrationError> {
        let ok = self.trust_mu > 0.0
            && self.trust_sigma > 0.0
            && self.mu_min < self.mu_max
            && self.sigma_min > 0.0
            && self.sigma_min < self.sigma_max()
            && self.grid >= 3
            && self.grid % 2 == 1
            && self.initial_grid >= 2
            && self.xtol > 0.0
            && self.max_evals >= 3
            && self.penalty >= 0.0
            && self.floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(CalibrationError::InvalidInput(format!("invalid fit settings {self:?}")))
        }
    }
}

/// Outcome of one search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearFit {
    pub mu: f64,
    pub sigma: f64,
    /// Top share produced by the fitted pair.
    pub share: f64,
    /// Objective at the fitted pair.
    pub objective: f64,
    pub evaluations: usize,
}

impl YearFit {
    pub fn failed(&self, cfg: &FitConfig) -> bool {
        !(self.objective <= cfg.floor)
    }
}

struct Search {
    center: [f64; 2],
    half: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
    penalty: f64,
}

impl Search {
    fn objective(&self, share: f64, target: f64, p: &[f64; 2]) -> f64 {
        let dm = (p[0] - self.center[0]) / self.half[0];
        let ds = (p[1] - self.center[1]) / self.half[1];
        (share - target).powi(2) + self.penalty * (dm * dm + ds * ds)
    }

    /// `points` values spaced evenly over `center[k] +- span`, clamped into the box.
    fn axis(&self, k: usize, points: usize, span: f64) -> Vec<f64> {
        let mut axis: Vec<f64> = (0..points)
            .map(|i| {
                let offset = -span + 2.0 * span * i as f64 / (points - 1) as f64;
                (self.center[k] + offset).clamp(self.lo[k], self.hi[k])
            })
            .collect();
        axis.dedup();
        axis
    }

    /// Coarse grid, then a simplex started at the best grid point.
    fn run<F: FnMut(&[f64; 2]) -> f64>(
        &self,
        mut f: F,
        mus: &[f64],
        sigmas: &[f64],
        step: [f64; 2],
        cfg: &FitConfig,
    ) -> ([f64; 2], f64, usize) {
        let mut best = (self.center, f64::INFINITY);
        let mut evals = 0;
        for &m in mus {
            for &s in sigmas {
                let p = [m, s];
                let v = f(&p);
                evals += 1;
                if v < best.1 {
                    best = (p, v);
                }
            }
        }
        let m = nelder_mead(
            &mut f,
            best.0,
            step,
            self.lo,
            self.hi,
            self.half,
            cfg.xtol,
            cfg.max_evals,
        );
        evals += m.evaluations;
        if m.value <= best.1 {
            (m.point, m.value, evals)
        } else {
            (best.0, best.1, evals)
        }
    }
}

fn check_share(name: &str, v: f64) -> Result<(), CalibrationError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CalibrationError::InvalidInput(format!("{name} = {v} outside (0, 1)")))
    }
}

/// Fits `(mu, sigma)` so that the top-`percentile` share of `n` stationary
/// draws at rate `r0` matches `target0`. The draws are fixed by `seed` and
/// coincide with those of a stationary [`crate::ensemble::init_population`]
/// under the same seed.
pub fn fit_initial(
    r0: f64,
    target0: f64,
    percentile: f64,
    n: usize,
    seed: u64,
    cfg: &FitConfig,
) -> Result<YearFit, CalibrationError> {
    let fit = search_initial(r0, target0, percentile, n, seed, cfg)?;
    if fit.failed(cfg) {
        return Err(CalibrationError::OptimizerFailure {
            year_index: 0,
            objective: fit.objective,
            floor: cfg.floor,
        });
    }
    Ok(fit)
}

pub(crate) fn search_initial(
    r0: f64,
    target0: f64,
    percentile: f64,
    n: usize,
    seed: u64,
    cfg: &FitConfig,
) -> Result<YearFit, CalibrationError> {
    cfg.validate()?;
    check_share("target share", target0)?;
    check_share("percentile", percentile)?;
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(CalibrationError::InvalidInput(format!("resetting rate {r0} outside (0, 1)")));
    }
    let uniforms = model::stationary_uniforms(
        &mut rng::stream(rng::derive_seed(seed, domain::INIT)),
        n,
    );
    top_share(&uniforms, percentile)?;
    let share_at = |p: &[f64; 2]| -> f64 {
        let law = ModelParams::new(p[0], p[1], r0, 1.0)
            .and_then(|m| model::stationary_law(&m));
        match law {
            Ok(law) => top_share(&law.transform(&uniforms), percentile).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        }
    };
    let lo = [cfg.mu_min, cfg.sigma_min];
    let hi = [cfg.mu_max, cfg.sigma_max()];
    let center = [
        cfg.anchor.0.clamp(lo[0], hi[0]),
        cfg.anchor.1.sqrt().clamp(lo[1], hi[1]),
    ];
    let search = Search {
        center,
        half: [cfg.trust_mu, cfg.trust_sigma],
        lo,
        hi,
        penalty: cfg.penalty,
    };
    let g = cfg.initial_grid;
    let even = |k: usize| -> Vec<f64> {
        let mut axis: Vec<f64> = (0..g)
            .map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / (g - 1) as f64)
            .chain([center[k]])
            .collect();
        axis.sort_by(f64::total_cmp);
        axis.dedup();
        axis
    };
    let step = [
        (hi[0] - lo[0]) / (g - 1) as f64 / 2.0,
        (hi[1] - lo[1]) / (g - 1) as f64 / 2.0,
    ];
    let (point, objective, evaluations) = search.run(
        |p| search.objective(share_at(p), target0, p),
        &even(0),
        &even(1),
        step,
        cfg,
    );
    Ok(YearFit {
        mu: point[0],
        sigma: point[1],
        share: share_at(&point),
        objective,
        evaluations,
    })
}

/// Starts a population from the stationary law of an initial fit, with the
/// same draws that fit used.
pub fn initial_state(
    fit: &YearFit,
    r0: f64,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<PopulationState, CalibrationError> {
    let params = ModelParams::new(fit.mu, fit.sigma, r0, 1.0)?;
    Ok(crate::ensemble::init_population(params, n, InitMode::Stationary, seed)?.with_dt(dt)?)
}

/// Fits the growth parameters for the year ahead of `state`: one year of
/// propagation at resetting rate `r_t` under the fitted pair should give a
/// top-`percentile` share of `target_next`. Every candidate is evaluated on
/// the same noise. The search starts in the trust box around the current pair
/// and widens to the admissible box when that misses the floor. The state is
/// advanced under the fitted pair, also when the search fails.
pub fn fit_year(
    state: &mut PopulationState,
    r_t: f64,
    target_next: f64,
    percentile: f64,
    cfg: &FitConfig,
) -> Result<YearFit, CalibrationError> {
    let fit = search_year(state, r_t, target_next, percentile, cfg)?;
    if fit.failed(cfg) {
        return Err(CalibrationError::OptimizerFailure {
            year_index: 0,
            objective: fit.objective,
            floor: cfg.floor,
        });
    }
    Ok(fit)
}

pub(crate) fn search_year(
    state: &mut PopulationState,
    r_t: f64,
    target_next: f64,
    percentile: f64,
    cfg: &FitConfig,
) -> Result<YearFit, CalibrationError> {
    cfg.validate()?;
    check_share("target share", target_next)?;
    if !(r_t > 0.0 && r_t < 1.0) {
        return Err(CalibrationError::InvalidInput(format!("resetting rate {r_t} outside (0, 1)")));
    }
    let steps = (1.0 / state.dt()).round() as u64;
    if ((steps as f64) * state.dt() - 1.0).abs() > 1e-9 {
        return Err(CalibrationError::InvalidInput(format!(
            "dt = {} does not divide one year",
            state.dt()
        )));
    }
    state.set_params(state.params().with_rate(r_t)?)?;
    top_share(state.incomes(), percentile)?;
    let block = state.draw_block(steps);
    let lo = [cfg.mu_min, cfg.sigma_min];
    let hi = [cfg.mu_max, cfg.sigma_max()];
    let center = [
        state.params().mu().clamp(lo[0], hi[0]),
        state.params().sigma().clamp(lo[1], hi[1]),
    ];
    let search = Search {
        center,
        half: [cfg.trust_mu, cfg.trust_sigma],
        lo: [lo[0].max(center[0] - cfg.trust_mu), lo[1].max(center[1] - cfg.trust_sigma)],
        hi: [hi[0].min(center[0] + cfg.trust_mu), hi[1].min(center[1] + cfg.trust_sigma)],
        penalty: cfg.penalty,
    };
    let mut buf = Vec::with_capacity(state.n());
    let mut share_at = |p: &[f64; 2]| -> f64 {
        match state.evaluate_block_into(&block, p[0], p[1], &mut buf) {
            Ok(()) => top_share(&buf, percentile).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        }
    };
    let mus = search.axis(0, cfg.grid, cfg.trust_mu);
    let sigmas = search.axis(1, cfg.grid, cfg.trust_sigma);
    let step = [
        cfg.trust_mu / (cfg.grid - 1) as f64,
        cfg.trust_sigma / (cfg.grid - 1) as f64,
    ];
    let (mut point, mut objective, mut evaluations) = search.run(
        |p| {
            let s = share_at(p);
            search.objective(s, target_next, p)
        },
        &mus,
        &sigmas,
        step,
        cfg,
    );
    if objective > cfg.floor {
        // the trust box cannot reach the target; widen to the admissible box
        let wide = Search { lo, hi, ..search };
        let g = cfg.grid;
        let even = |k: usize| -> Vec<f64> {
            (0..g)
                .map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / (g - 1) as f64)
                .collect()
        };
        let step = [
            (hi[0] - lo[0]) / (g - 1) as f64 / 2.0,
            (hi[1] - lo[1]) / (g - 1) as f64 / 2.0,
        ];
        let (p, v, e) = wide.run(
            |p| {
                let s = share_at(p);
                wide.objective(s, target_next, p)
            },
            &even(0),
            &even(1),
            step,
            cfg,
        );
        evaluations += e;
        if v < objective {
            point = p;
            objective = v;
        }
    }
    let share = share_at(&point);
    state.commit_block(block, point[0], point[1])?;
    Ok(YearFit {
        mu: point[0],
        sigma: point[1],
        share,
        objective,
        evaluations,
    })
}
