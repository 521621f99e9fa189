use srgbm_core::ensemble::{init_population, propagate, InitMode};
use srgbm_core::measures::{earnings_elasticity, gatsby_sweep, measure_panel, SweepConfig};
use srgbm_core::model::{theoretical_ee, ModelParams};
use srgbm_core::rng::derive_seed;
use srgbm_core::stats::{mean, standard_error, LinearTrend};

fn params(r: f64) -> ModelParams {
    ModelParams::from_sigma2(0.02, 0.02, r).unwrap()
}

fn stationary_elasticity(r: f64, delta: f64, n: usize, seed: u64) -> f64 {
    let mut s = init_population(params(r), n, InitMode::Stationary, seed).unwrap();
    let start = s.incomes().to_vec();
    propagate(&mut s, delta, &[]).unwrap();
    earnings_elasticity(&start, s.incomes()).unwrap()
}

#[test]
fn elasticity_example_at_r_one_tenth() {
    let ee = stationary_elasticity(0.1, 10.0, 10_000, 4);
    assert!((ee - 0.36788).abs() < 0.05, "ee {ee}");
}

#[test]
fn elasticity_matches_exponential_decay() {
    for &r in &[0.06, 0.08, 0.12] {
        for &delta in &[5.0, 10.0] {
            let ees: Vec<f64> = (0..10)
                .map(|k| stationary_elasticity(r, delta, 5_000, derive_seed(99, k)))
                .collect();
            let (m, se) = (mean(&ees), standard_error(&ees));
            let want = theoretical_ee(r, delta);
            assert!((m - want).abs() < 3.0 * se, "r {r} delta {delta}: {m} vs {want} (se {se})");
        }
    }
}

#[test]
fn stable_gini_has_no_trend() {
    let mut s = init_population(params(0.12), 10_000, InitMode::Stationary, 5).unwrap();
    let times: Vec<f64> = (0..=100).map(f64::from).collect();
    let panel = propagate(&mut s, 100.0, &times).unwrap();
    let m = measure_panel(&panel, &[0.01, 0.1], Some(10.0)).unwrap();
    let trend = LinearTrend::fit(&m.times(), &m.gini_series()).unwrap();
    assert!(trend.slope.abs() < 0.002, "slope {}", trend.slope);
    assert_eq!(m.spearman_series().len(), 91);
    assert!(m.rows.iter().all(|r| (0.0..=1.0).contains(&r.gini) && r.theil >= 0.0));
}

#[test]
fn gatsby_points_follow_theory() {
    let cfg = SweepConfig {
        n: 10_000,
        reps: 20,
        delta: 10.0,
        ..Default::default()
    };
    let grid = [0.06, 0.09, 0.12];
    let points = gatsby_sweep(&params(0.1), &grid, &cfg, 17).unwrap();
    for w in points.windows(2) {
        assert!(w[1].ee_median < w[0].ee_median);
    }
    let last = &points[2];
    assert!((last.gini_median() - 0.2).abs() < 0.05, "gini {}", last.gini_median());
    assert!((last.ee_median - 0.301).abs() < 0.03, "ee {}", last.ee_median);
    for p in &points {
        assert!(p.gini.q1 <= p.gini.median && p.gini.median <= p.gini.q3);
        assert!(p.gini.whisker_lo <= p.gini.q1 && p.gini.q3 <= p.gini.whisker_hi);
    }
}
