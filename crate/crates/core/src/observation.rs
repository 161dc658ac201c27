//! The observation layer linking SIR incidence to daily interest scores.
//!
//! Daily incidence (a proportion) is expressed in percentage points and
//! scaled by the reporting parameter `r`, giving the mean of an independent
//! Poisson observation for each day:
//!
//! ```text
//! interest_t ~ Poisson(r * 100 * c_t)
//! ```
//!
//! The model is initialised one day before the first observation
//! ([`T0_OFFSET_DAYS`]), so observation `t` (1-based) aligns with grid day
//! `t` of the trajectory. The prior is a gamma distribution on the mean
//! infectious period `1 / gamma` plus flat priors, bounded to keep the
//! posterior proper, on the remaining parameters.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Distribution;

use crate::error::Error;
use crate::math;
use crate::params::SirParams;
use crate::sir::{integrate, Trajectory};
use crate::Result;

/// Days between model initialisation (grid day 0) and the first observation
/// (grid day 1).
pub const T0_OFFSET_DAYS: usize = 1;

/// Incidence proportions are converted to percentage points before the
/// reporting scale `r` applies; this is the single place the convention
/// lives.
pub const PERCENT_SCALE: f64 = 100.0;

/// Upper bound of the flat prior on the transmission rate `beta`.
pub const BETA_MAX: f64 = 100.0;

/// Upper bound of the flat prior on the reporting scale `r`.
pub const R_MAX: f64 = 1e6;

/// Upper bound of the flat prior on the initial prevalence `i0`.
pub const I0_MAX: f64 = 0.5;

/// Floor applied to Poisson means so impossible-but-observed days yield a
/// very unlikely, rather than undefined, likelihood.
pub const MEAN_FLOOR: f64 = 1e-10;

/// A log probability density; may be `-inf` for impossible data but never
/// NaN.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogDensity(f64);

impl LogDensity {
    /// The impossible-data value.
    pub const NEG_INFINITY: Self = Self(f64::NEG_INFINITY);

    /// Wraps a raw value, coercing NaN (which only arises from arithmetic
    /// on conflicting infinities) to `-inf`.
    #[must_use]
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            Self(f64::NEG_INFINITY)
        } else {
            Self(value)
        }
    }

    /// The raw log-density value.
    #[must_use]
    pub fn value(self) -> f64 {
        self.0
    }

    /// True unless the value is `-inf`.
    #[must_use]
    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl core::ops::Add for LogDensity {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.0 + rhs.0)
    }
}

/// Daily observations anchored so the first entry is strictly positive.
///
/// Entry `t` (0-based) is the interest score observed on model grid day
/// `t + 1`; grid day 0 is the unobserved initialisation day.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWindow {
    observations: Vec<f64>,
}

impl ObservationWindow {
    /// Wraps a series of daily values, requiring every value to be a finite
    /// non-negative real and the first to be strictly positive.
    pub fn new(observations: Vec<f64>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidWindow(String::from("no observations")));
        }
        for (t, &y) in observations.iter().enumerate() {
            if !y.is_finite() || y < 0.0 {
                return Err(Error::InvalidWindow(alloc::format!(
                    "observation {t} is {y}, expected a finite non-negative value"
                )));
            }
        }
        if observations[0] <= 0.0 {
            return Err(Error::InvalidWindow(String::from(
                "first observation must be strictly positive",
            )));
        }
        Ok(Self { observations })
    }

    /// Builds a window from a raw daily series by dropping leading zero
    /// days, so the window starts at the earliest value above zero.
    /// Trailing zeros are retained. Returns the number of dropped days
    /// together with the window.
    pub fn from_interest(values: &[f64]) -> Result<(usize, Self)> {
        let offset = values.iter().take_while(|&&v| v == 0.0).count();
        if offset == values.len() {
            return Err(Error::InvalidWindow(String::from(
                "series has no value above zero",
            )));
        }
        Ok((offset, Self::new(values[offset..].to_vec())?))
    }

    /// The observed values, one per day.
    #[must_use]
    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    /// Number of observed days.
    #[must_use]
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    /// Always false; a window holds at least one observation.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Days between model initialisation and the first observation.
    #[must_use]
    pub fn t0_offset(&self) -> usize {
        T0_OFFSET_DAYS
    }
}

/// Gamma prior on the mean infectious period `1 / gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    shape: f64,
    rate: f64,
}

impl GammaPrior {
    /// Builds a prior from shape and rate, both strictly positive.
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        for (name, value) in [("shape", shape), ("rate", rate)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParam {
                    name,
                    value,
                    reason: "must be a positive real",
                });
            }
        }
        Ok(Self { shape, rate })
    }

    /// Builds the prior matching a given mean and variance
    /// (`shape = mean^2 / var`, `rate = mean / var`).
    pub fn from_mean_var(mean: f64, var: f64) -> Result<Self> {
        for (name, value) in [("mean", mean), ("var", var)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParam {
                    name,
                    value,
                    reason: "must be a positive real",
                });
            }
        }
        Self::new(mean * mean / var, mean / var)
    }

    /// Shape parameter.
    #[must_use]
    pub fn shape(&self) -> f64 {
        self.shape
    }

    /// Rate parameter.
    #[must_use]
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Prior mean `shape / rate`.
    #[must_use]
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    /// Prior variance `shape / rate^2`.
    #[must_use]
    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    /// Log density at `x`; `-inf` outside the positive support.
    #[must_use]
    pub fn log_pdf(&self, x: f64) -> LogDensity {
        if !x.is_finite() || x <= 0.0 {
            return LogDensity::NEG_INFINITY;
        }
        LogDensity::new(
            self.shape * math::ln(self.rate) - math::ln_gamma(self.shape)
                + (self.shape - 1.0) * math::ln(x)
                - self.rate * x,
        )
    }

    /// Draws one value from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rand_distr::Gamma::new(self.shape, 1.0 / self.rate)
            .expect("shape and scale are validated positive")
            .sample(rng)
    }
}

impl Default for GammaPrior {
    /// The default prior has mean 1 day and variance 0.1 day², i.e. shape 10
    /// and rate 10.
    fn default() -> Self {
        Self::from_mean_var(1.0, 0.1).expect("constants are positive")
    }
}

/// Expected interest per observation day: `r * 100 * c_t` for
/// `t = 1..=horizon`.
#[must_use]
pub fn expected_interest(trajectory: &Trajectory, r: f64) -> Vec<f64> {
    trajectory
        .daily_incidence()
        .iter()
        .map(|c| r * (PERCENT_SCALE * c))
        .collect()
}

/// Poisson log likelihood `y ln(mean) - mean - ln Gamma(y + 1)` with the
/// mean floored at [`MEAN_FLOOR`].
///
/// `y` may be non-integer (interest scores are rescaled counts); the
/// factorial is extended continuously through the gamma function. Negative
/// or non-finite `y` is impossible data and yields `-inf`.
#[must_use]
pub fn poisson_loglik(y: f64, mean: f64) -> LogDensity {
    if !y.is_finite() || y < 0.0 || !mean.is_finite() {
        return LogDensity::NEG_INFINITY;
    }
    let mean = mean.max(MEAN_FLOOR);
    LogDensity::new(y * math::ln(mean) - mean - math::ln_gamma(y + 1.0))
}

/// Log likelihood of a whole observation window: the model is integrated
/// from one day before the first observation and each day contributes an
/// independent Poisson term.
///
/// Integration failures (extreme parameters) are reported as `-inf` so a
/// sampler simply rejects the move.
#[must_use]
pub fn series_loglik(window: &ObservationWindow, params: &SirParams) -> LogDensity {
    let trajectory = match integrate(params, window.len()) {
        Ok(t) => t,
        Err(err) => {
            log::debug!("integration failed during likelihood evaluation: {err}");
            return LogDensity::NEG_INFINITY;
        }
    };
    let means = expected_interest(&trajectory, params.r);
    let mut total = LogDensity::new(0.0);
    for (&y, &mean) in window.observations().iter().zip(&means) {
        total = total + poisson_loglik(y, mean);
        if !total.is_finite() {
            return LogDensity::NEG_INFINITY;
        }
    }
    total
}

/// Log prior: the gamma log density of the mean infectious period
/// `1 / gamma`, plus flat priors on `beta` in `(0, BETA_MAX]`, `r` in
/// `(0, R_MAX]` and `i0` in `(0, I0_MAX]` that contribute only their
/// support bounds.
#[must_use]
pub fn log_prior(params: &SirParams, prior: &GammaPrior) -> LogDensity {
    let in_support = params.beta > 0.0
        && params.beta <= BETA_MAX
        && params.gamma > 0.0
        && params.gamma.is_finite()
        && params.r > 0.0
        && params.r <= R_MAX
        && params.i0 > 0.0
        && params.i0 <= I0_MAX;
    if !in_support {
        return LogDensity::NEG_INFINITY;
    }
    prior.log_pdf(1.0 / params.gamma)
}

/// Joint log posterior `log_prior + series_loglik` (up to the constant
/// normalisation). The likelihood is only evaluated when the prior is
/// finite, so out-of-support parameters never trigger an integration.
#[must_use]
pub fn log_posterior(
    window: &ObservationWindow,
    params: &SirParams,
    prior: &GammaPrior,
) -> LogDensity {
    let lp = log_prior(params, prior);
    if !lp.is_finite() {
        return LogDensity::NEG_INFINITY;
    }
    lp + series_loglik(window, params)
}

/// Simulates an observed interest series of the given length: the expected
/// interest under `params` with independent Poisson noise per day.
pub fn simulate_interest<R: Rng + ?Sized>(
    params: &SirParams,
    days: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let trajectory = integrate(params, days)?;
    Ok(expected_interest(&trajectory, params.r)
        .into_iter()
        .map(|mean| poisson_draw(mean, rng))
        .collect())
}

/// Draws from Poisson(mean), treating non-positive means as exactly zero.
/// Means beyond the sampler's supported range fall back to the mean itself,
/// where the relative noise `1/sqrt(mean)` is negligible anyway.
pub(crate) fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    match rand_distr::Poisson::new(mean) {
        Ok(dist) => dist.sample(rng),
        Err(_) => mean,
    }
}
