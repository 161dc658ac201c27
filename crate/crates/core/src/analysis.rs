//! Posterior summaries and derived outbreak quantities.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::math;
use crate::mcmc::{map_estimate, Draw, PosteriorSamples};
use crate::observation::{expected_interest, poisson_draw, ObservationWindow};
use crate::params::SirParams;
use crate::sir::{effective_r, integrate};
use crate::Result;

/// Median and central 95% credible interval of one quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CredibleSummary {
    /// Posterior median.
    pub median: f64,
    /// 2.5% quantile.
    pub lower95: f64,
    /// 97.5% quantile.
    pub upper95: f64,
}

/// Posterior summaries of the fitted and derived parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSummary {
    /// Basic reproduction number `beta / gamma`.
    pub r0: CredibleSummary,
    /// Generation time `1 / gamma` in days.
    pub generation_time: CredibleSummary,
    /// Transmission rate.
    pub beta: CredibleSummary,
    /// Recovery rate.
    pub gamma: CredibleSummary,
    /// Reporting scale.
    pub r: CredibleSummary,
    /// Initial prevalence.
    pub i0: CredibleSummary,
}

/// Per-day posterior predictive interest band.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveEnvelope {
    /// Per-day median simulated interest.
    pub median: Vec<f64>,
    /// Per-day 2.5% quantile.
    pub lower95: Vec<f64>,
    /// Per-day 97.5% quantile.
    pub upper95: Vec<f64>,
    /// Number of parameter sets simulated.
    pub n_draws: usize,
}

/// Per-day band of the effective reproduction number, on grid days
/// `0..=horizon` (day 0 is the initialisation day).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveRBand {
    /// Per-day posterior median of `R(t)`.
    pub median: Vec<f64>,
    /// Per-day 2.5% quantile.
    pub lower95: Vec<f64>,
    /// Per-day 97.5% quantile.
    pub upper95: Vec<f64>,
    /// First grid day on which the median falls below 1, if any.
    pub crossing_day: Option<usize>,
}

/// Goodness of fit of the highest-posterior draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// The draw used for prediction.
    pub map: Draw,
    /// Coefficient of determination on the fitted window.
    pub r2_in_sample: f64,
    /// Coefficient of determination on the held-out window, when given.
    pub r2_out_sample: Option<f64>,
}

/// Distribution of the incidence peak day over posterior draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakTiming {
    /// Mean peak day.
    pub mean_day: f64,
    /// Sample standard deviation of the peak day (0 for a single draw).
    pub sd_day: f64,
    /// Peak day of each simulated draw.
    pub days: Vec<usize>,
}

/// Minimum number of draws for a stable credible interval.
const MIN_SUMMARY_DRAWS: usize = 100;

/// Empirical quantile with linear interpolation between order statistics;
/// permutation-invariant in the input.
#[must_use]
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    debug_assert!(!values.is_empty() && (0.0..=1.0).contains(&q));
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn credible_summary(values: &[f64]) -> CredibleSummary {
    CredibleSummary {
        median: empirical_quantile(values, 0.5),
        lower95: empirical_quantile(values, 0.025),
        upper95: empirical_quantile(values, 0.975),
    }
}

/// Credible summaries of every fitted and derived parameter. Requires at
/// least [`MIN_SUMMARY_DRAWS`] draws.
pub fn summarize(samples: &PosteriorSamples) -> Result<ParamSummary> {
    if samples.draws.len() < MIN_SUMMARY_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_SUMMARY_DRAWS,
            got: samples.draws.len(),
        });
    }
    let collect = |f: fn(&SirParams) -> f64| -> Vec<f64> {
        samples.draws.iter().map(|d| f(&d.params)).collect()
    };
    Ok(ParamSummary {
        r0: credible_summary(&collect(SirParams::r0)),
        generation_time: credible_summary(&collect(SirParams::generation_time)),
        beta: credible_summary(&collect(|p| p.beta)),
        gamma: credible_summary(&collect(|p| p.gamma)),
        r: credible_summary(&collect(|p| p.r)),
        i0: credible_summary(&collect(|p| p.i0)),
    })
}

/// Indices of the parameter sets used for a simulation ensemble: a uniform
/// subsample without replacement when enough draws exist, otherwise with
/// replacement.
fn ensemble_indices<R: Rng + ?Sized>(
    available: usize,
    n_draws: usize,
    rng: &mut R,
) -> Vec<usize> {
    if n_draws <= available {
        rand::seq::index::sample(rng, available, n_draws).into_vec()
    } else {
        (0..n_draws).map(|_| rng.random_range(0..available)).collect()
    }
}

/// Simulates `n_draws` parameter sets from the posterior over the window's
/// length, adds Poisson observation noise, and returns per-day quantile
/// bands.
pub fn posterior_predictive<R: Rng + ?Sized>(
    samples: &PosteriorSamples,
    window: &ObservationWindow,
    n_draws: usize,
    rng: &mut R,
) -> Result<PredictiveEnvelope> {
    if samples.draws.is_empty() {
        return Err(Error::TooFewDraws { needed: 1, got: 0 });
    }
    if n_draws == 0 {
        return Err(Error::InvalidParam {
            name: "n_draws",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let horizon = window.len();
    let indices = ensemble_indices(samples.draws.len(), n_draws, rng);
    let mut simulated: Vec<Vec<f64>> = Vec::with_capacity(indices.len());
    for idx in indices {
        let params = samples.draws[idx].params;
        let trajectory = integrate(&params, horizon)?;
        let row: Vec<f64> = expected_interest(&trajectory, params.r)
            .into_iter()
            .map(|mean| poisson_draw(mean, rng))
            .collect();
        simulated.push(row);
    }
    let mut median = Vec::with_capacity(horizon);
    let mut lower95 = Vec::with_capacity(horizon);
    let mut upper95 = Vec::with_capacity(horizon);
    let mut column = Vec::with_capacity(simulated.len());
    for day in 0..horizon {
        column.clear();
        column.extend(simulated.iter().map(|row| row[day]));
        median.push(empirical_quantile(&column, 0.5));
        lower95.push(empirical_quantile(&column, 0.025));
        upper95.push(empirical_quantile(&column, 0.975));
    }
    Ok(PredictiveEnvelope {
        median,
        lower95,
        upper95,
        n_draws,
    })
}

/// Per-day posterior band of the effective reproduction number
/// `R(t) = R0 * S(t)` over the window's grid (`0..=len`), computed from
/// every retained draw, along with the first day the median drops below 1.
pub fn effective_r_envelope(
    samples: &PosteriorSamples,
    window: &ObservationWindow,
) -> Result<EffectiveRBand> {
    if samples.draws.is_empty() {
        return Err(Error::TooFewDraws { needed: 1, got: 0 });
    }
    let horizon = window.len();
    let mut per_draw: Vec<Vec<f64>> = Vec::with_capacity(samples.draws.len());
    for draw in &samples.draws {
        let trajectory = integrate(&draw.params, horizon)?;
        per_draw.push(effective_r(&trajectory, &draw.params));
    }
    let days = horizon + 1;
    let mut median = Vec::with_capacity(days);
    let mut lower95 = Vec::with_capacity(days);
    let mut upper95 = Vec::with_capacity(days);
    let mut column = Vec::with_capacity(per_draw.len());
    for day in 0..days {
        column.clear();
        column.extend(per_draw.iter().map(|row| row[day]));
        median.push(empirical_quantile(&column, 0.5));
        lower95.push(empirical_quantile(&column, 0.025));
        upper95.push(empirical_quantile(&column, 0.975));
    }
    let crossing_day = median.iter().position(|&m| m < 1.0);
    Ok(EffectiveRBand {
        median,
        lower95,
        upper95,
        crossing_day,
    })
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
///
/// Requires equally long, finite series of at least two points with
/// non-constant observations.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() || observed.len() < 2 {
        return Err(Error::InvalidParam {
            name: "observed",
            value: observed.len() as f64,
            reason: "observed and predicted must have equal length >= 2",
        });
    }
    if observed
        .iter()
        .chain(predicted)
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            context: "r_squared input",
        });
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::NonFinite {
            context: "r_squared with constant observations",
        });
    }
    let ss_res: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Noise-free prediction of the highest-posterior draw scored against the
/// fitted window and, optionally, a held-out window (anchored at its own
/// first positive day).
pub fn validate(
    samples: &PosteriorSamples,
    window_a: &ObservationWindow,
    window_b: Option<&ObservationWindow>,
) -> Result<ValidationReport> {
    let map = map_estimate(samples)?;
    let predict = |window: &ObservationWindow| -> Result<f64> {
        let trajectory = integrate(&map.params, window.len())?;
        let predicted = expected_interest(&trajectory, map.params.r);
        r_squared(window.observations(), &predicted)
    };
    let r2_in_sample = predict(window_a)?;
    let r2_out_sample = window_b.map(predict).transpose()?;
    Ok(ValidationReport {
        map,
        r2_in_sample,
        r2_out_sample,
    })
}

/// Day of peak daily incidence for one parameter set: the earliest day-grid
/// argmax. Retries once with a three-fold horizon when the maximum sits on
/// the last day.
fn peak_day(params: &SirParams, horizon: usize) -> Result<usize> {
    for (attempt, h) in [horizon, horizon * 3].into_iter().enumerate() {
        let incidence = integrate(params, h)?.daily_incidence();
        let mut best_day = 1;
        let mut best = f64::NEG_INFINITY;
        for (idx, &value) in incidence.iter().enumerate() {
            if value > best {
                best = value;
                best_day = idx + 1;
            }
        }
        if best_day < h {
            return Ok(best_day);
        }
        if attempt == 1 {
            return Err(Error::NoInteriorPeak { horizon: h });
        }
    }
    unreachable!("loop always returns");
}

/// Distribution of the incidence peak day when outbreaks are re-seeded at
/// prevalence `i0`: each sampled draw keeps its transmission and recovery
/// rates, the initial prevalence is overridden, and the daily incidence
/// argmax is recorded.
///
/// Draws are taken evenly spaced along the chain, so the result is a pure
/// function of the posterior sample.
pub fn peak_timing(
    samples: &PosteriorSamples,
    n_draws: usize,
    i0: f64,
    horizon: usize,
) -> Result<PeakTiming> {
    if samples.draws.is_empty() {
        return Err(Error::TooFewDraws { needed: 1, got: 0 });
    }
    if n_draws == 0 {
        return Err(Error::InvalidParam {
            name: "n_draws",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if horizon < 2 {
        return Err(Error::InvalidParam {
            name: "horizon",
            value: horizon as f64,
            reason: "must cover at least two days",
        });
    }
    if !i0.is_finite() || i0 <= 0.0 || i0 >= 1.0 {
        return Err(Error::InvalidParam {
            name: "i0",
            value: i0,
            reason: "must lie strictly between 0 and 1",
        });
    }
    let available = samples.draws.len();
    let take = n_draws.min(available);
    let mut days = Vec::with_capacity(take);
    for j in 0..take {
        let idx = j * available / take;
        let base = samples.draws[idx].params;
        let params = SirParams { i0, ..base };
        days.push(peak_day(&params, horizon)?);
    }
    let n = days.len() as f64;
    let mean_day = days.iter().map(|&d| d as f64).sum::<f64>() / n;
    let sd_day = if days.len() < 2 {
        0.0
    } else {
        let ss = days
            .iter()
            .map(|&d| (d as f64 - mean_day) * (d as f64 - mean_day))
            .sum::<f64>();
        math::sqrt(ss / (n - 1.0))
    };
    Ok(PeakTiming {
        mean_day,
        sd_day,
        days,
    })
}

/// Probability that an outbreak seeded by a single case dies out before
/// taking off: `max(0, 1 - 1/r0)`, i.e. zero at or below the threshold
/// `r0 = 1`.
pub fn extinction_probability(r0: f64) -> Result<f64> {
    if !r0.is_finite() || r0 <= 0.0 {
        return Err(Error::InvalidParam {
            name: "r0",
            value: r0,
            reason: "must be a positive real",
        });
    }
    Ok((1.0 - 1.0 / r0).max(0.0))
}
