//! Closed-form analytics of geometric Brownian motion with stochastic resetting.
//!
//! Income grows as GBM with drift `mu` and volatility `sigma` and is returned
//! to `x0` at the events of a Poisson clock of rate `r`. The log-income between
//! resets is a Brownian motion with drift `a = mu - sigma^2 / 2`; all formulas
//! below go through [`ModelParams::log_drift`] for that quantity.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use thiserror::Error;

use crate::numerics;
use crate::rng::{self, open_unit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("no stationary law: {0} is zero")]
    NoStationaryLaw(&'static str),
    #[error("shape parameter must be positive, got {0}")]
    NonPositiveShape(f64),
    #[error("cannot parse parameters: {0}")]
    Parse(String),
}

/// Drift, volatility, resetting rate and reset level of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    mu: f64,
    sigma: f64,
    r: f64,
    x0: f64,
}

impl ModelParams {
    /// Builds a parameter set; `mu` in 1/year, `sigma` in 1/sqrt(year), `r` in 1/year.
    pub fn new(mu: f64, sigma: f64, r: f64, x0: f64) -> Result<Self, ModelError> {
        check_finite("mu", mu)?;
        check_finite("sigma", sigma)?;
        check_finite("r", r)?;
        check_finite("x0", x0)?;
        if sigma < 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "sigma",
                value: sigma,
                reason: "must be non-negative",
            });
        }
        if r < 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "r",
                value: r,
                reason: "must be non-negative",
            });
        }
        if x0 <= 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "x0",
                value: x0,
                reason: "must be positive",
            });
        }
        Ok(Self { mu, sigma, r, x0 })
    }

    /// Builds a parameter set from the variance rate `sigma2` with `x0 = 1`.
    pub fn from_sigma2(mu: f64, sigma2: f64, r: f64) -> Result<Self, ModelError> {
        check_finite("sigma2", sigma2)?;
        if sigma2 < 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "sigma2",
                value: sigma2,
                reason: "must be non-negative",
            });
        }
        Self::new(mu, sigma2.sqrt(), r, 1.0)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Drift of log-income between resets, `mu - sigma^2 / 2`.
    pub fn log_drift(&self) -> f64 {
        self.mu - 0.5 * self.sigma2()
    }

    pub fn with_rate(self, r: f64) -> Result<Self, ModelError> {
        Self::new(self.mu, self.sigma, r, self.x0)
    }

    pub fn with_growth(self, mu: f64, sigma: f64) -> Result<Self, ModelError> {
        Self::new(mu, sigma, self.r, self.x0)
    }

    pub fn with_x0(self, x0: f64) -> Result<Self, ModelError> {
        Self::new(self.mu, self.sigma, self.r, x0)
    }
}

fn check_finite(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}

/// Key-value text form (`mu`, `sigma2`, `r`, `x0`), one `key = value` per line.
impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mu = {}", self.mu)?;
        writeln!(f, "sigma2 = {}", self.sigma2())?;
        writeln!(f, "r = {}", self.r)?;
        writeln!(f, "x0 = {}", self.x0)
    }
}

impl FromStr for ModelParams {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mut mu, mut sigma2, mut r, mut x0) = (None, None, None, Some(1.0));
        for (lineno, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ModelError::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let value: f64 = value.trim().parse().map_err(|_| {
                ModelError::Parse(format!("line {}: bad number {:?}", lineno + 1, value.trim()))
            })?;
            match key.trim() {
                "mu" => mu = Some(value),
                "sigma2" => sigma2 = Some(value),
                "r" => r = Some(value),
                "x0" => x0 = Some(value),
                other => {
                    return Err(ModelError::Parse(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let missing = |k: &str| ModelError::Parse(format!("missing key {k}"));
        let p = Self::from_sigma2(
            mu.ok_or_else(|| missing("mu"))?,
            sigma2.ok_or_else(|| missing("sigma2"))?,
            r.ok_or_else(|| missing("r"))?,
        )?;
        p.with_x0(x0.unwrap_or(1.0))
    }
}

/// The three long-time regimes of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegimeLabel {
    /// `r < mu`: every moment diverges.
    Frozen,
    /// `mu <= r <= 2 mu + sigma^2`: the mean converges, the variance does not.
    Unstable,
    /// `r > 2 mu + sigma^2`: mean and variance converge.
    Stable,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::Frozen => "frozen",
            RegimeLabel::Unstable => "unstable",
            RegimeLabel::Stable => "stable",
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeLabel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "frozen" => Ok(RegimeLabel::Frozen),
            "unstable" => Ok(RegimeLabel::Unstable),
            "stable" => Ok(RegimeLabel::Stable),
            other => Err(ModelError::Parse(format!("unknown regime {other:?}"))),
        }
    }
}

/// Stationary income law: a double power law glued at `x0`.
///
/// Density `c (x/x0)^(kappa-1) / x0` below `x0` and `c (x/x0)^(-alpha-1) / x0`
/// above, with `c = alpha kappa / (alpha + kappa)`. `kappa` is the second root
/// of `sigma^2 z^2 / 2 + a z - r = 0` (with sign flipped), so that
/// `kappa = alpha + 2a / sigma^2 = 2r / (sigma^2 alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryLaw {
    pub alpha: f64,
    pub kappa: f64,
    pub c_norm: f64,
    pub x0: f64,
}

impl StationaryLaw {
    /// Probability mass at or below `x0`.
    pub fn lower_mass(&self) -> f64 {
        self.alpha / (self.alpha + self.kappa)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = x / self.x0;
        if z <= 1.0 {
            self.c_norm * z.powf(self.kappa - 1.0) / self.x0
        } else {
            self.c_norm * z.powf(-self.alpha - 1.0) / self.x0
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = x / self.x0;
        if z <= 1.0 {
            self.lower_mass() * z.powf(self.kappa)
        } else {
            1.0 - (1.0 - self.lower_mass()) * z.powf(-self.alpha)
        }
    }

    /// Inverse CDF on (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let p = self.lower_mass();
        if u <= p {
            self.x0 * (u / p).powf(1.0 / self.kappa)
        } else {
            self.x0 * ((1.0 - u) / (1.0 - p)).powf(-1.0 / self.alpha)
        }
    }

    /// `E[X^n]`, finite only when `alpha > n`.
    pub fn raw_moment(&self, n: f64) -> Option<f64> {
        if self.alpha <= n {
            return None;
        }
        let body = 1.0 / (self.kappa + n) + 1.0 / (self.alpha - n);
        Some(self.x0.powf(n) * self.c_norm * body)
    }

    pub fn mean(&self) -> Option<f64> {
        self.raw_moment(1.0)
    }

    /// `E[log X]`; always finite.
    pub fn log_mean(&self) -> f64 {
        self.x0.ln() + (self.kappa - self.alpha) / (self.alpha * self.kappa)
    }

    /// `Var[log X]`.
    pub fn log_variance(&self) -> f64 {
        // log(X/x0) is -Exp(kappa) with prob p and +Exp(alpha) otherwise.
        let p = self.lower_mass();
        let second = p * 2.0 / (self.kappa * self.kappa) + (1.0 - p) * 2.0 / (self.alpha * self.alpha);
        let first = (self.kappa - self.alpha) / (self.alpha * self.kappa);
        second - first * first
    }

    /// Maps the uniforms `u` (each in (0, 1)) through the inverse CDF.
    pub fn transform(&self, uniforms: &[f64]) -> Vec<f64> {
        uniforms.iter().map(|&u| self.quantile(u)).collect()
    }
}

/// Upper-tail exponent of the stationary income law.
pub fn shape_alpha(p: &ModelParams) -> Result<f64, ModelError> {
    if p.sigma == 0.0 {
        return Err(ModelError::NoStationaryLaw("sigma"));
    }
    if p.r == 0.0 {
        return Err(ModelError::NoStationaryLaw("r"));
    }
    let s2 = p.sigma2();
    let a = p.log_drift();
    let disc = (a * a + 2.0 * p.r * s2).sqrt();
    // Rationalised branch avoids cancellation when a > 0.
    let alpha = if a >= 0.0 {
        2.0 * p.r / (a + disc)
    } else {
        (disc - a) / s2
    };
    Ok(alpha)
}

pub fn stationary_law(p: &ModelParams) -> Result<StationaryLaw, ModelError> {
    let alpha = shape_alpha(p)?;
    let kappa = 2.0 * p.r / (p.sigma2() * alpha);
    Ok(StationaryLaw {
        alpha,
        kappa,
        c_norm: alpha * kappa / (alpha + kappa),
        x0: p.x0,
    })
}

/// `n` i.i.d. draws from `law`, reproducible from `seed`.
pub fn sample_stationary(law: &StationaryLaw, n: usize, seed: u64) -> Result<Vec<f64>, ModelError> {
    validate_law(law)?;
    let mut rng = rng::stream(seed);
    Ok(stationary_uniforms(&mut rng, n)
        .into_iter()
        .map(|u| law.quantile(u))
        .collect())
}

/// The uniforms consumed by [`sample_stationary`] for the same seed.
pub fn stationary_uniforms<R: RngCore>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| open_unit(rng)).collect()
}

fn validate_law(law: &StationaryLaw) -> Result<(), ModelError> {
    for (name, v) in [("alpha", law.alpha), ("kappa", law.kappa), ("x0", law.x0)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ModelError::InvalidParameter {
                name,
                value: v,
                reason: "must be positive and finite",
            });
        }
    }
    Ok(())
}

/// Expected income at time `t` starting from `x0`.
pub fn mean_income(p: &ModelParams, t: f64) -> f64 {
    let gap = p.mu - p.r;
    let scale = p.mu.abs().max(p.r.abs());
    let growth = if gap.abs() <= 1e-12 * scale || gap == 0.0 {
        p.mu * t
    } else {
        // mu (e^{gap t} - 1) / gap, i.e. the closed form minus one, without cancellation.
        p.mu * (gap * t).exp_m1() / gap
    };
    p.x0 * (1.0 + growth)
}

/// Expected log-income at time `t` starting from `x0`.
pub fn log_mean_income(p: &ModelParams, t: f64) -> f64 {
    let a = p.log_drift();
    let base = if p.r == 0.0 {
        a * t
    } else {
        -a * (-p.r * t).exp_m1() / p.r
    };
    p.x0.ln() + base
}

/// Rate above which the `n`-th moment converges: `n mu + n (n - 1) sigma^2 / 2`.
pub fn moment_threshold(p: &ModelParams, n: u32) -> f64 {
    let n = f64::from(n);
    n * p.mu + n * (n - 1.0) * p.sigma2() / 2.0
}

/// Long-time `n`-th moment in units of `x0^n`; `None` when it diverges (`r <= r_n`).
pub fn stationary_moment(p: &ModelParams, n: u32) -> Option<f64> {
    let rn = moment_threshold(p, n);
    (p.r > rn).then(|| p.r / (p.r - rn) * p.x0.powi(n as i32))
}

pub fn classify_regime(p: &ModelParams) -> RegimeLabel {
    if p.r < moment_threshold(p, 1) {
        RegimeLabel::Frozen
    } else if p.r <= moment_threshold(p, 2) {
        RegimeLabel::Unstable
    } else {
        RegimeLabel::Stable
    }
}

/// Gini coefficient of a pure power law with tail exponent `alpha`.
pub fn theoretical_gini(alpha: f64) -> Result<f64, ModelError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(ModelError::NonPositiveShape(alpha));
    }
    Ok(if alpha <= 1.0 { 1.0 } else { 1.0 / (2.0 * alpha - 1.0) })
}

/// Stationary earnings elasticity over a lag of `delta` years.
pub fn theoretical_ee(r: f64, delta: f64) -> f64 {
    (-r * delta).exp()
}

/// Law of the last reset time `t_l` before `t`: an atom at zero plus a density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LastResetDensity {
    /// Probability that no reset happened in `[0, t]`.
    pub atom_at_zero: f64,
    /// Continuous density at the requested `t_l`.
    pub density: f64,
}

pub fn last_reset_density(t_l: f64, t: f64, r: f64) -> Result<LastResetDensity, ModelError> {
    if !(t >= 0.0 && t_l >= 0.0 && t_l <= t) {
        return Err(ModelError::InvalidParameter {
            name: "t_l",
            value: t_l,
            reason: "must lie in [0, t]",
        });
    }
    if r < 0.0 {
        return Err(ModelError::InvalidParameter {
            name: "r",
            value: r,
            reason: "must be non-negative",
        });
    }
    Ok(LastResetDensity {
        atom_at_zero: (-r * t).exp(),
        density: r * (-r * (t - t_l)).exp(),
    })
}

/// Mass of the continuous part of the last-reset law, `1 - e^{-rt}`.
pub fn last_reset_continuous_mass(t: f64, r: f64) -> f64 {
    -(-r * t).exp_m1()
}

/// Stationary density at `x` by direct quadrature of the renewal formula
/// `r * integral_0^inf e^{-ru} P0(x, u) du`, with `P0` the reset-free lognormal
/// propagator. Independent of the closed form in [`StationaryLaw::pdf`].
pub fn renewal_stationary_density(p: &ModelParams, x: f64) -> Result<f64, ModelError> {
    if p.sigma == 0.0 {
        return Err(ModelError::NoStationaryLaw("sigma"));
    }
    if p.r == 0.0 {
        return Err(ModelError::NoStationaryLaw("r"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let s2 = p.sigma2();
    let a = p.log_drift();
    let lx = (x / p.x0).ln();
    let propagator = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let z = lx - a * u;
        (-z * z / (2.0 * s2 * u)).exp() / (x * (2.0 * std::f64::consts::PI * s2 * u).sqrt())
    };
    // Integrate in s = sqrt(u) to tame the u -> 0 behaviour, then cut the tail
    // where e^{-ru} is below machine precision.
    let s_max = (40.0 / p.r).sqrt();
    let integrand = |s: f64| {
        let u = s * s;
        2.0 * s * (-p.r * u).exp() * propagator(u)
    };
    let knots = 64;
    let h = s_max / knots as f64;
    let total: f64 = (0..knots)
        .map(|k| numerics::integrate(integrand, k as f64 * h, (k + 1) as f64 * h, 1e-14))
        .sum();
    Ok(p.r * total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64, sigma2: f64, r: f64) -> ModelParams {
        ModelParams::from_sigma2(mu, sigma2, r).unwrap()
    }

    #[test]
    fn alpha_at_regime_boundaries() {
        assert!((shape_alpha(&params(0.02, 0.02, 0.02)).unwrap() - 1.0).abs() < 1e-12);
        assert!((shape_alpha(&params(0.02, 0.02, 0.06)).unwrap() - 2.0).abs() < 1e-12);
        assert!((shape_alpha(&params(0.02, 0.02, 0.12)).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_branches_agree_with_textbook_root() {
        for &(mu, s2, r) in &[(0.05, 0.01, 0.03), (-0.02, 0.04, 0.1), (0.0, 0.02, 0.05)] {
            let p = params(mu, s2, r);
            let a = mu - s2 / 2.0;
            let naive = (-a + (a * a + 2.0 * r * s2).sqrt()) / s2;
            assert!((shape_alpha(&p).unwrap() - naive).abs() < 1e-10);
        }
    }

    #[test]
    fn alpha_rejects_degenerate_params() {
        assert_eq!(
            shape_alpha(&params(0.02, 0.0, 0.1)),
            Err(ModelError::NoStationaryLaw("sigma"))
        );
        assert_eq!(
            shape_alpha(&params(0.02, 0.02, 0.0)),
            Err(ModelError::NoStationaryLaw("r"))
        );
    }

    #[test]
    fn law_constants_at_alpha_two() {
        let law = stationary_law(&params(0.02, 0.02, 0.06)).unwrap();
        assert!((law.alpha - 2.0).abs() < 1e-12);
        assert!((law.kappa - 3.0).abs() < 1e-12);
        assert!((law.c_norm - 1.2).abs() < 1e-12);
        assert!((law.lower_mass() - 0.4).abs() < 1e-12);
        assert!((law.cdf(1.0) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn density_is_continuous_at_x0() {
        let law = stationary_law(&params(0.03, 0.05, 0.07).with_x0(2.5).unwrap()).unwrap();
        let below = law.pdf(2.5);
        let above = law.pdf(2.5 * (1.0 + 1e-12));
        assert!((below - law.c_norm / 2.5).abs() < 1e-12);
        assert!((above - below).abs() < 1e-9);
    }

    /// Integral of the density over the log-income axis by adaptive quadrature.
    fn total_mass(law: &StationaryLaw) -> f64 {
        let g = |v: f64| {
            let x = law.x0 * v.exp();
            law.pdf(x) * x
        };
        let span = 45.0 / law.alpha.min(law.kappa);
        let pieces = 40;
        let mut total = 0.0;
        for k in 0..pieces {
            let lo = -span + 2.0 * span * k as f64 / pieces as f64;
            let hi = -span + 2.0 * span * (k + 1) as f64 / pieces as f64;
            // keep x0 on a knot so the kink is not inside a panel
            if lo < 0.0 && hi > 0.0 {
                total += numerics::integrate(g, lo, 0.0, 1e-15) + numerics::integrate(g, 0.0, hi, 1e-15);
            } else {
                total += numerics::integrate(g, lo, hi, 1e-15);
            }
        }
        total
    }

    #[test]
    fn density_normalises_by_quadrature() {
        for &(mu, s2, r, x0) in &[
            (0.02, 0.02, 0.06, 1.0),
            (0.02, 0.02, 0.01, 1.0),
            (0.05, 0.1, 0.2, 3.0),
            (-0.03, 0.01, 0.02, 0.5),
        ] {
            let law = stationary_law(&params(mu, s2, r).with_x0(x0).unwrap()).unwrap();
            let mass = total_mass(&law);
            assert!((mass - 1.0).abs() < 1e-9, "mass {mass} for {mu} {s2} {r}");
        }
    }

    #[test]
    fn density_matches_renewal_quadrature() {
        for &(mu, s2, r) in &[(0.02, 0.02, 0.06), (0.02, 0.02, 0.12), (0.03, 0.05, 0.02)] {
            let p = params(mu, s2, r);
            let law = stationary_law(&p).unwrap();
            for &x in &[0.3, 0.7, 1.5, 3.0, 8.0] {
                let renewal = renewal_stationary_density(&p, x).unwrap();
                let closed = law.pdf(x);
                assert!(
                    (renewal - closed).abs() < 1e-7 * closed.max(1e-3),
                    "x={x}: renewal {renewal} closed {closed}"
                );
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let law = stationary_law(&params(0.02, 0.02, 0.06)).unwrap();
        for &u in &[1e-9, 0.1, 0.4, 0.400001, 0.7, 0.999999] {
            assert!((law.cdf(law.quantile(u)) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let law = stationary_law(&params(0.02, 0.02, 0.06)).unwrap();
        assert_eq!(
            sample_stationary(&law, 1000, 9).unwrap(),
            sample_stationary(&law, 1000, 9).unwrap()
        );
        assert_ne!(
            sample_stationary(&law, 1000, 9).unwrap(),
            sample_stationary(&law, 1000, 10).unwrap()
        );
    }

    #[test]
    fn moments_from_law_match_rate_formula() {
        let p = params(0.02, 0.02, 0.12);
        let law = stationary_law(&p).unwrap();
        assert!((law.mean().unwrap() - stationary_moment(&p, 1).unwrap()).abs() < 1e-12);
        assert!((law.raw_moment(2.0).unwrap() - stationary_moment(&p, 2).unwrap()).abs() < 1e-12);
        assert!((law.log_mean() - p.log_drift() / p.r()).abs() < 1e-12);
        assert!(stationary_moment(&p, 3).is_none());
    }

    /// Renewal oracle for the first moment: e^{-rt} e^{mu t} + int_0^t r e^{-ru} e^{mu u} du.
    fn mean_by_renewal(mu: f64, r: f64, t: f64) -> f64 {
        (-r * t).exp() * (mu * t).exp()
            + numerics::integrate(|u| r * (-r * u).exp() * (mu * u).exp(), 0.0, t, 1e-14)
    }

    #[test]
    fn mean_income_examples() {
        let p = params(0.02, 0.02, 0.06);
        assert_eq!(mean_income(&p, 0.0), 1.0);
        let at10 = mean_income(&p, 10.0);
        assert!((at10 - mean_by_renewal(0.02, 0.06, 10.0)).abs() < 1e-10);
        assert!((at10 - 1.16484).abs() < 5e-6);
        assert!((mean_income(&p, 2000.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn mean_income_is_continuous_across_mu_equals_r() {
        let at = mean_income(&params(0.05, 0.02, 0.05), 7.0);
        assert!((at - (1.0 + 0.05 * 7.0)).abs() < 1e-15);
        let near = mean_income(&params(0.05 + 1e-12, 0.02, 0.05), 7.0);
        assert!((near - at).abs() < 1e-10);
        let near = mean_income(&params(0.05 - 1e-12, 0.02, 0.05), 7.0);
        assert!((near - at).abs() < 1e-10);
    }

    #[test]
    fn log_mean_income_examples() {
        let p = params(0.02, 0.02, 0.06);
        assert_eq!(log_mean_income(&p, 0.0), 0.0);
        assert!((log_mean_income(&p, 1e4) - 1.0 / 6.0).abs() < 1e-12);
        // oracle: e^{-rt} a t + int_0^t r e^{-ru} a u du
        let a = 0.01;
        let oracle = (-0.6f64).exp() * a * 10.0
            + numerics::integrate(|u| 0.06 * (-0.06 * u).exp() * a * u, 0.0, 10.0, 1e-15);
        let v = log_mean_income(&p, 10.0);
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.075198).abs() < 5e-7);
        assert!((log_mean_income(&params(0.02, 0.02, 0.0), 3.0) - 0.03).abs() < 1e-15);
    }

    #[test]
    fn thresholds() {
        let p = params(0.02, 0.02, 0.1);
        assert_eq!(moment_threshold(&p, 1), 0.02);
        assert!((moment_threshold(&p, 2) - 0.06).abs() < 1e-15);
        assert!((moment_threshold(&p, 3) - 0.12).abs() < 1e-15);
    }

    #[test]
    fn regime_examples_and_boundaries() {
        assert_eq!(classify_regime(&params(0.02, 0.02, 0.01)), RegimeLabel::Frozen);
        assert_eq!(classify_regime(&params(0.02, 0.02, 0.04)), RegimeLabel::Unstable);
        assert_eq!(classify_regime(&params(0.02, 0.02, 0.10)), RegimeLabel::Stable);
        assert_eq!(classify_regime(&params(0.02, 0.02, 0.02)), RegimeLabel::Unstable);
        let p = params(0.02, 0.04, 0.08);
        assert!((moment_threshold(&p, 2) - 0.08).abs() < 1e-15);
        assert_eq!(classify_regime(&p), RegimeLabel::Unstable);
    }

    #[test]
    fn gini_and_ee_theory() {
        assert_eq!(theoretical_gini(0.5).unwrap(), 1.0);
        assert_eq!(theoretical_gini(1.0).unwrap(), 1.0);
        assert!((theoretical_gini(3.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(theoretical_gini(0.0).is_err());
        assert!(theoretical_gini(f64::NAN).is_err());
        assert_eq!(theoretical_ee(0.0, 25.0), 1.0);
        assert!((theoretical_ee(0.1, 10.0) - 0.36788).abs() < 5e-6);
        assert!((theoretical_ee(0.12, 10.0) - 0.30119).abs() < 5e-6);
    }

    #[test]
    fn last_reset_law_normalises() {
        for &(t, r) in &[(10.0, 0.1), (3.0, 0.0), (50.0, 0.02)] {
            let d = last_reset_density(0.0, t, r).unwrap();
            let cont = numerics::integrate(|tl| last_reset_density(tl, t, r).unwrap().density, 0.0, t, 1e-14);
            assert!((d.atom_at_zero + cont - 1.0).abs() < 1e-12);
            assert!((cont - last_reset_continuous_mass(t, r)).abs() < 1e-12);
        }
        let d = last_reset_density(4.0, 10.0, 0.0).unwrap();
        assert_eq!((d.atom_at_zero, d.density), (1.0, 0.0));
        assert!((last_reset_continuous_mass(10.0, 0.1) - 0.63212).abs() < 5e-6);
        assert!(last_reset_density(11.0, 10.0, 0.1).is_err());
    }

    #[test]
    fn params_text_round_trip() {
        let p = ModelParams::from_sigma2(0.02, 0.02, 0.06).unwrap().with_x0(2.0).unwrap();
        let text = p.to_string();
        let back: ModelParams = text.parse().unwrap();
        assert!((back.mu() - p.mu()).abs() < 1e-15);
        assert!((back.sigma2() - p.sigma2()).abs() < 1e-15);
        assert_eq!(back.r(), p.r());
        assert_eq!(back.x0(), 2.0);
        assert!("mu = 0.1\nr = 0.2".parse::<ModelParams>().is_err());
        assert!("mu = 0.1\nsigma2 = -1\nr = 0.2".parse::<ModelParams>().is_err());
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ModelParams::new(0.1, -0.1, 0.1, 1.0).is_err());
        assert!(ModelParams::new(0.1, 0.1, -0.1, 1.0).is_err());
        assert!(ModelParams::new(0.1, 0.1, 0.1, 0.0).is_err());
        assert!(ModelParams::new(f64::NAN, 0.1, 0.1, 1.0).is_err());
    }
}
