use srgbm_core::calibration::{
    self, calibrate, fit_initial, fit_year, simulate_share_path, CalibrationInput,
    CalibrationResult, FitConfig,
};
use srgbm_core::ensemble::{init_population, InitMode};
use srgbm_core::measures::top_share;
use srgbm_core::model::{classify_regime, shape_alpha, ModelParams};
use srgbm_core::with_workers;

const SEED: u64 = 42;

fn stationary_share(mu: f64, sigma2: f64, r: f64, p: f64, n: usize, seed: u64) -> f64 {
    let params = ModelParams::from_sigma2(mu, sigma2, r).unwrap();
    let state = init_population(params, n, InitMode::Stationary, seed).unwrap();
    top_share(state.incomes(), p).unwrap()
}

fn alpha_of(mu: f64, sigma: f64, r: f64) -> f64 {
    shape_alpha(&ModelParams::new(mu, sigma, r, 1.0).unwrap()).unwrap()
}

#[test]
fn initial_fit_recovers_generating_pair() {
    let (r0, n) = (0.06, 100_000);
    let target = stationary_share(0.02, 0.02, r0, 0.01, n, SEED);
    let fit = fit_initial(r0, target, 0.01, n, SEED, &FitConfig::default()).unwrap();
    assert!((fit.mu - 0.02).abs() < 0.01, "mu {}", fit.mu);
    assert!((fit.sigma * fit.sigma - 0.02).abs() < 0.01, "sigma2 {}", fit.sigma * fit.sigma);

    // independent draws for the target
    let target = stationary_share(0.02, 0.02, r0, 0.01, n, SEED + 1);
    let fit = fit_initial(r0, target, 0.01, n, SEED, &FitConfig::default()).unwrap();
    assert!((fit.mu - 0.02).abs() < 0.01, "mu {}", fit.mu);
    assert!((fit.sigma * fit.sigma - 0.02).abs() < 0.01);
}

#[test]
fn initial_fit_hits_its_own_share() {
    let cfg = FitConfig::default();
    let (r0, n) = (0.04, 20_000);
    let first = fit_initial(r0, 0.15, 0.01, n, SEED, &cfg).unwrap();
    let again = fit_initial(r0, first.share, 0.01, n, SEED, &cfg).unwrap();
    assert!(again.objective < 1e-6, "objective {}", again.objective);
    assert!((again.share - first.share).abs() < 1e-3);
}

#[test]
fn larger_target_gives_heavier_tail() {
    let cfg = FitConfig::default();
    let (r0, n) = (0.05, 20_000);
    let alphas: Vec<f64> = [0.08, 0.12, 0.16, 0.2, 0.25]
        .iter()
        .map(|&target| {
            let fit = fit_initial(r0, target, 0.01, n, SEED, &cfg).unwrap();
            alpha_of(fit.mu, fit.sigma, r0)
        })
        .collect();
    for w in alphas.windows(2) {
        assert!(w[1] < w[0], "alpha not decreasing: {alphas:?}");
    }
}

#[test]
fn initial_fit_rejects_unreachable_target() {
    let cfg = FitConfig::default();
    // a top-1% share of 0.95 is out of reach of any admissible pair at this rate
    let err = fit_initial(0.9, 0.95, 0.01, 10_000, SEED, &cfg).unwrap_err();
    assert!(err.is_numerical(), "{err}");
    assert!(fit_initial(0.0, 0.1, 0.01, 10_000, SEED, &cfg).is_err());
    assert!(fit_initial(0.05, 1.0, 0.01, 10_000, SEED, &cfg).is_err());
}

fn year_start(n: usize) -> srgbm_core::ensemble::PopulationState {
    let params = ModelParams::from_sigma2(0.02, 0.02, 0.06).unwrap();
    init_population(params, n, InitMode::Stationary, SEED)
        .unwrap()
        .with_dt(0.01)
        .unwrap()
}

#[test]
fn zero_innovation_year_keeps_previous_pair() {
    let cfg = FitConfig::default();
    let mut state = year_start(20_000);
    let r_t = 0.05;
    let mut twin = state.clone();
    twin.set_params(twin.params().with_rate(r_t).unwrap()).unwrap();
    twin.advance(100);
    let target = top_share(twin.incomes(), 0.01).unwrap();

    let fit = fit_year(&mut state, r_t, target, 0.01, &cfg).unwrap();
    assert!((fit.mu - 0.02).abs() < 1e-3, "mu {}", fit.mu);
    assert!((fit.sigma - 0.02f64.sqrt()).abs() < 1e-3, "sigma {}", fit.sigma);
    assert_eq!(state.incomes(), twin.incomes());
    assert!((state.t() - 1.0).abs() < 1e-12);
}

#[test]
fn yearly_optimum_beats_every_grid_candidate() {
    let cfg = FitConfig::default();
    let base = year_start(10_000);
    let (r_t, target, p) = (0.05, 0.12, 0.01);

    let mut state = base.clone();
    let fit = fit_year(&mut state, r_t, target, p, &cfg).unwrap();

    let mut probe = base.clone();
    probe.set_params(probe.params().with_rate(r_t).unwrap()).unwrap();
    let block = probe.draw_block(100);
    let center = [base.params().mu(), base.params().sigma()];
    let half = [cfg.trust_mu, cfg.trust_sigma];
    let objective = |mu: f64, sigma: f64| {
        let incomes = probe.evaluate_block(&block, mu, sigma).unwrap();
        let share = top_share(&incomes, p).unwrap();
        let dm = (mu - center[0]) / half[0];
        let ds = (sigma - center[1]) / half[1];
        (share - target).powi(2) + cfg.penalty * (dm * dm + ds * ds)
    };
    let g = cfg.grid;
    for i in 0..g {
        for j in 0..g {
            let off = |k: usize, idx: usize| -half[k] + 2.0 * half[k] * idx as f64 / (g - 1) as f64;
            let mu = (center[0] + off(0, i)).clamp(cfg.mu_min, cfg.mu_max);
            let sigma = (center[1] + off(1, j)).clamp(cfg.sigma_min, cfg.sigma_max());
            assert!(
                fit.objective <= objective(mu, sigma),
                "grid point ({mu}, {sigma}) beats the optimum {}",
                fit.objective
            );
        }
    }
    assert!((objective(fit.mu, fit.sigma) - fit.objective).abs() < 1e-15);
    let committed = probe.evaluate_block(&block, fit.mu, fit.sigma).unwrap();
    assert_eq!(state.incomes(), committed.as_slice());
}

#[test]
fn failed_year_still_advances_state() {
    let cfg = FitConfig::default();
    let mut state = year_start(5_000);
    let err = fit_year(&mut state, 0.05, 0.9, 0.01, &cfg).unwrap_err();
    assert!(err.is_numerical());
    assert!((state.t() - 1.0).abs() < 1e-12);
}

fn synthetic_input(years: usize, n: usize, reps: usize, percentile: f64) -> CalibrationInput {
    let r_hat: Vec<f64> = (0..years).map(|t| 0.05 + 0.004 * (t as f64 * 0.7).sin()).collect();
    let truth = simulate_share_path(0.01, 0.02f64.sqrt(), &r_hat, percentile, n, 0.01, 7).unwrap();
    let mut input = CalibrationInput::new((1990..1990 + years as i32).collect(), r_hat, truth, percentile);
    input.n = n;
    input.reps = reps;
    input
}

fn check_invariants(result: &CalibrationResult, input: &CalibrationInput) {
    assert!(result.r_squared <= 1.0);
    assert_eq!(result.estimates.len(), input.years.len());
    for e in &result.estimates {
        assert!(e.sigma_hat >= 0.0);
        assert!(e.fitted_share > 0.0 && e.fitted_share < 1.0);
        assert!(e.mu_lo <= e.mu_hat && e.mu_hat <= e.mu_hi);
        assert!(e.sigma_lo <= e.sigma_hat && e.sigma_hat <= e.sigma_hi);
        assert!(e.r2_lo <= e.r2_hi);
        let params = ModelParams::new(e.mu_hat, e.sigma_hat, e.r_hat, 1.0).unwrap();
        assert_eq!(e.regime, classify_regime(&params), "year {}", e.year);
    }
}

#[test]
fn calibration_is_identical_across_worker_counts() {
    let input = synthetic_input(4, 4_000, 3, 0.1);
    let one = with_workers(Some(1), || calibrate(&input, SEED)).unwrap().unwrap();
    let three = with_workers(Some(3), || calibrate(&input, SEED)).unwrap().unwrap();
    assert_eq!(one, three);
    check_invariants(&one, &input);
    let other = calibrate(&input, SEED + 1).unwrap();
    assert_ne!(one.estimates, other.estimates);
}

#[test]
fn band_width_shrinks_with_replica_count() {
    let small = synthetic_input(5, 2_000, 25, 0.1);
    let large = CalibrationInput { reps: 100, ..small.clone() };
    let a = calibrate(&small, SEED).unwrap();
    let b = calibrate(&large, SEED).unwrap();
    check_invariants(&a, &small);
    check_invariants(&b, &large);
    let width = |r: &CalibrationResult| -> f64 {
        r.estimates.iter().map(|e| e.mu_hi - e.mu_lo).sum::<f64>()
    };
    let ratio = width(&a) / width(&b);
    assert!((1.6..=2.4).contains(&ratio), "band width ratio {ratio}");
}

#[test]
fn refitting_own_shares_stays_within_bands() {
    let input = synthetic_input(8, 5_000, 10, 0.1);
    let first = calibrate(&input, SEED).unwrap();
    let refit_input = CalibrationInput {
        target_share: first.estimates.iter().map(|e| e.fitted_share).collect(),
        ..input.clone()
    };
    let second = calibrate(&refit_input, SEED).unwrap();
    let inside = first
        .estimates
        .iter()
        .zip(&second.estimates)
        .filter(|(a, b)| {
            (a.mu_lo..=a.mu_hi).contains(&b.mu_hat) && (a.sigma_lo..=a.sigma_hi).contains(&b.sigma_hat)
        })
        .count();
    assert!(
        inside as f64 >= 0.9 * input.years.len() as f64,
        "{inside} of {} years inside the bands",
        input.years.len()
    );
}

#[test]
fn short_or_flat_input_is_rejected() {
    let mut input = synthetic_input(3, 1_000, 2, 0.1);
    input.target_share = vec![0.3; 3];
    let err = calibrate(&input, SEED).unwrap_err();
    assert!(!err.is_numerical());
    assert!(calibration::r_squared(&[0.1], &[0.1]).is_err());
}
