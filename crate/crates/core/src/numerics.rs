//! Small numerical helpers: adaptive quadrature and a bounded simplex minimizer.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Result of [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<const N: usize> {
    pub point: [f64; N],
    pub value: f64,
    pub evaluations: usize,
}

/// Box-constrained Nelder–Mead. Trial points are clamped into `[lo, hi]`
/// before evaluation. Stops once every simplex vertex lies within
/// `xtol * scale[k]` of the best vertex in each coordinate `k`, or after
/// `max_evals` evaluations.
#[allow(clippy::too_many_arguments)]
pub fn nelder_mead<const N: usize, F: FnMut(&[f64; N]) -> f64>(
    mut f: F,
    start: [f64; N],
    step: [f64; N],
    lo: [f64; N],
    hi: [f64; N],
    scale: [f64; N],
    xtol: f64,
    max_evals: usize,
) -> Minimum<N> {
    let clamp = |mut p: [f64; N]| {
        for k in 0..N {
            p[k] = p[k].clamp(lo[k], hi[k]);
        }
        p
    };
    let mut evals = 0;
    let mut eval = |p: &[f64; N], evals: &mut usize| {
        *evals += 1;
        let v = f(p);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let start = clamp(start);
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((start, eval(&start, &mut evals)));
    for k in 0..N {
        let mut p = start;
        p[k] += step[k];
        if p[k] > hi[k] {
            p[k] = start[k] - step[k];
        }
        let p = clamp(p);
        simplex.push((p, eval(&p, &mut evals)));
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0;
        let converged = simplex[1..].iter().all(|(p, _)| {
            (0..N).all(|k| (p[k] - best[k]).abs() <= xtol * scale[k])
        });
        if converged || evals >= max_evals {
            break;
        }
        let mut centroid = [0.0; N];
        for (p, _) in &simplex[..N] {
            for k in 0..N {
                centroid[k] += p[k] / N as f64;
            }
        }
        let along = |t: f64| {
            let worst = simplex[N].0;
            let mut p = [0.0; N];
            for k in 0..N {
                p[k] = centroid[k] + t * (worst[k] - centroid[k]);
            }
            clamp(p)
        };
        let reflected = along(-1.0);
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = eval(&expanded, &mut evals);
            simplex[N] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[N - 1].1 {
            simplex[N] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < simplex[N].1 {
            let p = along(-0.5);
            (p, eval(&p, &mut evals))
        } else {
            let p = along(0.5);
            (p, eval(&p, &mut evals))
        };
        if fc < simplex[N].1.min(fr) {
            simplex[N] = (contracted, fc);
            continue;
        }
        for i in 1..=N {
            let mut p = simplex[i].0;
            for k in 0..N {
                p[k] = best[k] + 0.5 * (p[k] - best[k]);
            }
            simplex[i] = (p, eval(&p, &mut evals));
        }
    }
    Minimum {
        point: simplex[0].0,
        value: simplex[0].1,
        evaluations: evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_finds_rosenbrock_minimum() {
        let m = nelder_mead(
            |p: &[f64; 2]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
            [-1.2, 1.0],
            [0.1, 0.1],
            [-5.0, -5.0],
            [5.0, 5.0],
            [1.0, 1.0],
            1e-8,
            5000,
        );
        assert!((m.point[0] - 1.0).abs() < 1e-5 && (m.point[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn simplex_respects_bounds() {
        let m = nelder_mead(
            |p: &[f64; 2]| (p[0] - 3.0).powi(2) + (p[1] + 2.0).powi(2),
            [0.0, 0.0],
            [0.5, 0.5],
            [-1.0, -1.0],
            [1.0, 1.0],
            [1.0, 1.0],
            1e-7,
            1000,
        );
        assert!((m.point[0] - 1.0).abs() < 1e-6);
        assert!((m.point[1] + 1.0).abs() < 1e-6);
        assert!(m.evaluations <= 1000);
    }

    #[test]
    fn integrates_smooth_functions() {
        let v = integrate(|x| x.exp(), 0.0, 1.0, 1e-13);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-12);
        let v = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate(|x| x, 3.0, 3.0, 1e-9), 0.0);
    }
}
