//! Random-walk Metropolis sampling of the transmission posterior.
//!
//! The chain moves on a working scale — `(ln beta, ln gamma, ln r,
//! logit i0)` — where Gaussian steps respect the parameter domain; the
//! Jacobian of the transform is part of the working-scale target so the
//! draws are samples from the natural-scale posterior. Step sizes are
//! rescaled every [`ADAPT_INTERVAL`] burn-in iterations towards
//! [`TARGET_ACCEPTANCE`] and frozen afterwards, keeping the recorded phase
//! a proper Metropolis chain.
//!
//! The kernel itself ([`sample_chain`]) is generic over any [`LogTarget`],
//! which is how it is validated against distributions with known moments.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Error;
use crate::math;
use crate::observation::{log_posterior, GammaPrior, LogDensity, ObservationWindow, PERCENT_SCALE};
use crate::params::SirParams;
use crate::Result;

/// Burn-in iterations between step-size rescalings.
pub const ADAPT_INTERVAL: usize = 500;

/// Acceptance rate the burn-in adaptation steers towards.
pub const TARGET_ACCEPTANCE: f64 = 0.25;

/// Names of the sampled parameters, in the order used by diagnostics.
pub const PARAM_NAMES: [&str; 4] = ["beta", "gamma", "r", "i0"];

/// Sampler settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    /// Seed for the chain's random stream.
    pub seed: u64,
    /// Iterations discarded (and used for adaptation) before recording.
    pub burn_in: usize,
    /// Post-burn-in iterations.
    pub samples: usize,
    /// Keep every `thin`-th post-burn-in draw.
    pub thin: usize,
    /// Initial proposal standard deviations on the working scale, in
    /// [`PARAM_NAMES`] order.
    pub step_sizes: [f64; 4],
    /// Whether burn-in step-size adaptation is enabled.
    pub adapt: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            burn_in: 10_000,
            samples: 40_000,
            thin: 1,
            step_sizes: [0.1; 4],
            adapt: true,
        }
    }
}

/// A point on the working scale `(ln beta, ln gamma, ln r, logit i0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkingPoint {
    /// Coordinates in [`PARAM_NAMES`] order.
    pub coords: [f64; 4],
}

impl WorkingPoint {
    /// Maps natural-scale parameters onto the working scale.
    #[must_use]
    pub fn from_params(params: &SirParams) -> Self {
        Self {
            coords: [
                math::ln(params.beta),
                math::ln(params.gamma),
                math::ln(params.r),
                math::ln(params.i0 / (1.0 - params.i0)),
            ],
        }
    }

    /// Maps back to the natural scale. The images of `exp` and the
    /// logistic keep every coordinate inside the parameter domain, so no
    /// validation is needed.
    #[must_use]
    pub fn to_params(&self) -> SirParams {
        SirParams {
            beta: math::exp(self.coords[0]),
            gamma: math::exp(self.coords[1]),
            r: math::exp(self.coords[2]),
            i0: logistic(self.coords[3]),
        }
    }

    /// Log absolute determinant of the working-to-natural Jacobian:
    /// `ln beta + ln gamma + ln r + ln(i0 (1 - i0))`.
    #[must_use]
    pub fn log_jacobian(&self) -> f64 {
        let i0 = logistic(self.coords[3]);
        self.coords[0] + self.coords[1] + self.coords[2] + math::ln(i0 * (1.0 - i0))
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + math::exp(-x))
}

/// An unnormalised log density the kernel can sample from.
pub trait LogTarget {
    /// Number of coordinates.
    fn dim(&self) -> usize;
    /// Log density at `x` (length `dim()`); `-inf` outside the support.
    fn log_density(&self, x: &[f64]) -> LogDensity;
}

/// Current position of a chain together with its cached log density.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// Position on the target's coordinate scale.
    pub position: Vec<f64>,
    /// Cached log density at `position`.
    pub log_density: LogDensity,
}

impl ChainState {
    /// Evaluates the target once and caches the value.
    pub fn new<T: LogTarget>(target: &T, position: Vec<f64>) -> Self {
        let log_density = target.log_density(&position);
        Self {
            position,
            log_density,
        }
    }
}

/// Gaussian random-walk proposal: each coordinate is perturbed
/// independently with its own standard deviation. A zero step leaves the
/// coordinate untouched.
#[must_use]
pub fn propose<R: Rng + ?Sized>(
    current: &WorkingPoint,
    step_sizes: &[f64; 4],
    rng: &mut R,
) -> WorkingPoint {
    let mut coords = current.coords;
    perturb(&mut coords, step_sizes, rng);
    WorkingPoint { coords }
}

fn perturb<R: Rng + ?Sized>(coords: &mut [f64], step_sizes: &[f64], rng: &mut R) {
    for (c, &s) in coords.iter_mut().zip(step_sizes) {
        if s > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            *c += s * z;
        }
    }
}

/// The Metropolis accept rule for a symmetric proposal: always accept
/// uphill moves, accept downhill moves with probability `exp(delta)`.
pub(crate) fn accept_move<R: Rng + ?Sized>(delta_log_density: f64, rng: &mut R) -> bool {
    if delta_log_density >= 0.0 {
        return true;
    }
    // For delta = -inf (or NaN from -inf vs -inf) this is always false.
    math::ln(rng.random::<f64>()) < delta_log_density
}

/// One Metropolis transition. Updates `state` in place and reports whether
/// the proposal was accepted. Proposals with `-inf` log density are never
/// accepted, even from a `-inf` starting point.
pub fn mh_step<T: LogTarget, R: Rng + ?Sized>(
    target: &T,
    state: &mut ChainState,
    step_sizes: &[f64],
    rng: &mut R,
) -> bool {
    let mut proposal = state.position.clone();
    perturb(&mut proposal, step_sizes, rng);
    let proposed_density = target.log_density(&proposal);
    if !proposed_density.is_finite() {
        return false;
    }
    if accept_move(proposed_density.value() - state.log_density.value(), rng) {
        state.position = proposal;
        state.log_density = proposed_density;
        return true;
    }
    false
}

/// Burn-in, recording and thinning controls for the generic kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainControls {
    /// Iterations discarded before recording.
    pub burn_in: usize,
    /// Post-burn-in iterations.
    pub samples: usize,
    /// Keep every `thin`-th post-burn-in draw.
    pub thin: usize,
    /// Whether to rescale step sizes during burn-in.
    pub adapt: bool,
}

/// Output of the generic kernel: working-scale draws with their cached
/// target values.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    /// Retained positions.
    pub draws: Vec<Vec<f64>>,
    /// Target log density of each retained position.
    pub log_density: Vec<f64>,
    /// Acceptance rate over the post-burn-in phase.
    pub acceptance_rate: f64,
    /// Step sizes in force after burn-in.
    pub step_sizes: Vec<f64>,
}

/// Multiplier applied to all step sizes after one adaptation window, based
/// on the window's acceptance rate. Smooth around the target, aggressive at
/// the pathological extremes.
fn tune_factor(rate: f64) -> f64 {
    if rate < 0.02 {
        0.3
    } else if rate > 0.9 {
        3.0
    } else {
        math::exp(2.0 * (rate - TARGET_ACCEPTANCE))
    }
}

/// Runs a random-walk Metropolis chain over an arbitrary target.
///
/// The starting point must have a finite log density, every step size must
/// be non-negative, and `thin >= 1`.
pub fn sample_chain<T: LogTarget, R: Rng + ?Sized>(
    target: &T,
    init: Vec<f64>,
    step_sizes: Vec<f64>,
    controls: &ChainControls,
    rng: &mut R,
) -> Result<ChainRun> {
    if init.len() != target.dim() || step_sizes.len() != target.dim() {
        return Err(Error::InvalidParam {
            name: "dim",
            value: init.len() as f64,
            reason: "init and step sizes must match the target dimension",
        });
    }
    if controls.thin == 0 {
        return Err(Error::InvalidParam {
            name: "thin",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if step_sizes.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidParam {
            name: "step_sizes",
            value: f64::NAN,
            reason: "must be finite and non-negative",
        });
    }
    let mut state = ChainState::new(target, init);
    if !state.log_density.is_finite() {
        return Err(Error::NonFinite {
            context: "log density of the chain's starting point",
        });
    }

    let mut steps = step_sizes;
    let mut accepted_in_window = 0usize;
    for iteration in 1..=controls.burn_in {
        if mh_step(target, &mut state, &steps, rng) {
            accepted_in_window += 1;
        }
        if controls.adapt && iteration % ADAPT_INTERVAL == 0 {
            let rate = accepted_in_window as f64 / ADAPT_INTERVAL as f64;
            let factor = tune_factor(rate);
            for s in &mut steps {
                *s *= factor;
            }
            accepted_in_window = 0;
        }
    }

    let retained = controls.samples / controls.thin;
    let mut draws = Vec::with_capacity(retained);
    let mut log_density = Vec::with_capacity(retained);
    let mut accepted = 0usize;
    for iteration in 1..=controls.samples {
        if mh_step(target, &mut state, &steps, rng) {
            accepted += 1;
        }
        if iteration % controls.thin == 0 {
            draws.push(state.position.clone());
            log_density.push(state.log_density.value());
        }
    }
    let acceptance_rate = if controls.samples == 0 {
        0.0
    } else {
        accepted as f64 / controls.samples as f64
    };
    Ok(ChainRun {
        draws,
        log_density,
        acceptance_rate,
        step_sizes: steps,
    })
}

/// One retained posterior draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    /// Natural-scale parameters.
    pub params: SirParams,
    /// Natural-scale log posterior (prior + likelihood, no Jacobian).
    pub log_posterior: f64,
}

/// Posterior draws from one chain, with the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    /// Retained draws in recording order.
    pub draws: Vec<Draw>,
    /// Acceptance rate over the recorded phase.
    pub acceptance_rate: f64,
    /// Settings the chain ran with.
    pub config: McmcConfig,
}

impl PosteriorSamples {
    /// The values of one natural-scale parameter across draws, in
    /// [`PARAM_NAMES`] order.
    #[must_use]
    pub fn param_series(&self, index: usize) -> Vec<f64> {
        self.draws
            .iter()
            .map(|d| match index {
                0 => d.params.beta,
                1 => d.params.gamma,
                2 => d.params.r,
                _ => d.params.i0,
            })
            .collect()
    }
}

/// The transmission posterior on the working scale: natural-scale prior and
/// likelihood plus the log Jacobian of the reparameterisation.
struct PosteriorTarget<'a> {
    window: &'a ObservationWindow,
    prior: &'a GammaPrior,
}

impl LogTarget for PosteriorTarget<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn log_density(&self, x: &[f64]) -> LogDensity {
        let point = WorkingPoint {
            coords: [x[0], x[1], x[2], x[3]],
        };
        let natural = log_posterior(self.window, &point.to_params(), self.prior);
        if !natural.is_finite() {
            return LogDensity::NEG_INFINITY;
        }
        LogDensity::new(natural.value() + point.log_jacobian())
    }
}

/// Default initial prevalence for chain starting points.
const INIT_I0: f64 = 1e-3;

/// Heuristic peak daily incidence (as a proportion) used to back out an
/// initial reporting scale from the observed maximum.
const INIT_PEAK_INCIDENCE: f64 = 0.01;

/// Maximum attempts at finding a starting point with finite posterior.
const MAX_INIT_ATTEMPTS: usize = 100;

/// Runs one chain against an observation window and returns the retained
/// draws on the natural scale.
///
/// The starting point draws the mean infectious period from the prior,
/// sets `beta = 2 gamma`, backs the reporting scale out of the observed
/// maximum, and starts `i0` at `1e-3`; if the posterior is not finite
/// there, jittered restarts are attempted.
pub fn run_chain(
    window: &ObservationWindow,
    prior: &GammaPrior,
    config: &McmcConfig,
) -> Result<PosteriorSamples> {
    let target = PosteriorTarget { window, prior };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let max_obs = window.observations().iter().cloned().fold(0.0, f64::max);
    let r_init = (max_obs / (PERCENT_SCALE * INIT_PEAK_INCIDENCE)).clamp(1e-3, crate::observation::R_MAX);

    let mut init = None;
    for attempt in 0..MAX_INIT_ATTEMPTS {
        let period = prior.sample(&mut rng).max(1e-6);
        let gamma = 1.0 / period;
        let params = SirParams {
            beta: (2.0 * gamma).min(crate::observation::BETA_MAX),
            gamma,
            r: r_init,
            i0: INIT_I0,
        };
        let mut point = WorkingPoint::from_params(&params);
        if attempt > 0 {
            // Widen the search once the deterministic heuristic has failed.
            perturb(&mut point.coords, &[0.5; 4], &mut rng);
        }
        if target.log_density(&point.coords).is_finite() {
            init = Some(point);
            break;
        }
    }
    let Some(init) = init else {
        return Err(Error::ChainInit {
            attempts: MAX_INIT_ATTEMPTS,
        });
    };

    let controls = ChainControls {
        burn_in: config.burn_in,
        samples: config.samples,
        thin: config.thin,
        adapt: config.adapt,
    };
    let run = sample_chain(
        &target,
        init.coords.to_vec(),
        config.step_sizes.to_vec(),
        &controls,
        &mut rng,
    )?;

    let draws = run
        .draws
        .iter()
        .zip(&run.log_density)
        .map(|(x, &lp_working)| {
            let point = WorkingPoint {
                coords: [x[0], x[1], x[2], x[3]],
            };
            Draw {
                params: point.to_params(),
                log_posterior: lp_working - point.log_jacobian(),
            }
        })
        .collect();
    Ok(PosteriorSamples {
        draws,
        acceptance_rate: run.acceptance_rate,
        config: *config,
    })
}

/// The retained draw with the highest natural-scale log posterior; ties go
/// to the earliest draw.
pub fn map_estimate(samples: &PosteriorSamples) -> Result<Draw> {
    let mut best: Option<Draw> = None;
    for draw in &samples.draws {
        let better = match &best {
            None => true,
            Some(b) => draw.log_posterior > b.log_posterior,
        };
        if better {
            best = Some(*draw);
        }
    }
    best.ok_or(Error::TooFewDraws { needed: 1, got: 0 })
}

/// Convergence diagnostics over two or more chains.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Effective sample size per parameter (summed over chains), in
    /// [`PARAM_NAMES`] order.
    pub ess: [f64; 4],
    /// Split-chain potential scale reduction per parameter.
    pub split_rhat: [f64; 4],
    /// Acceptance rate of each chain.
    pub acceptance_rates: Vec<f64>,
}

/// Minimum draws per chain for diagnostics.
const MIN_DIAGNOSTIC_DRAWS: usize = 10;

/// Effective sample size and split-chain scale reduction for each
/// parameter. Requires at least two chains with at least ten draws each.
pub fn diagnostics(chains: &[PosteriorSamples]) -> Result<Diagnostics> {
    if chains.len() < 2 {
        return Err(Error::TooFewChains { got: chains.len() });
    }
    for chain in chains {
        if chain.draws.len() < MIN_DIAGNOSTIC_DRAWS {
            return Err(Error::TooFewDraws {
                needed: MIN_DIAGNOSTIC_DRAWS,
                got: chain.draws.len(),
            });
        }
    }
    let mut ess = [0.0; 4];
    let mut split_rhat = [1.0; 4];
    for p in 0..4 {
        let series: Vec<Vec<f64>> = chains.iter().map(|c| c.param_series(p)).collect();
        ess[p] = series.iter().map(|s| effective_sample_size(s)).sum();
        split_rhat[p] = split_scale_reduction(&series);
    }
    Ok(Diagnostics {
        ess,
        split_rhat,
        acceptance_rates: chains.iter().map(|c| c.acceptance_rate).collect(),
    })
}

/// Effective sample size of one series via the initial monotone sequence
/// estimator: sums autocovariances in non-negative, non-increasing pairs.
/// A constant series reports 0 (no information about spread).
#[must_use]
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return 0.0;
    }
    // An exactly constant series would otherwise report tau ~ n through
    // rounding noise in the autocovariances.
    if series.iter().all(|&v| v == series[0]) {
        return 0.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let autocov = |lag: usize| -> f64 {
        series[..n - lag]
            .iter()
            .zip(&series[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64
    };
    let var0 = autocov(0);
    if var0 <= 0.0 {
        return 0.0;
    }
    let mut pair_sum = 0.0;
    let mut previous_pair = f64::INFINITY;
    let mut m = 0usize;
    while 2 * m + 1 < n {
        let pair = autocov(2 * m) + autocov(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(previous_pair);
        pair_sum += pair;
        previous_pair = pair;
        m += 1;
    }
    let tau = (2.0 * pair_sum / var0 - 1.0).max(1.0);
    n as f64 / tau
}

/// Split-chain potential scale reduction: each chain is halved and the
/// usual between/within variance ratio is taken over the halves.
fn split_scale_reduction(chains: &[Vec<f64>]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return f64::NAN;
    }
    // All chains stuck on one value: nothing to disagree about.
    let first = chains[0][0];
    if chains.iter().all(|c| c.iter().all(|&v| v == first)) {
        return 1.0;
    }
    let mut halves: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for chain in chains {
        halves.push(&chain[..half]);
        halves.push(&chain[chain.len() - half..]);
    }
    let m = halves.len() as f64;
    let len = half as f64;
    let means: Vec<f64> = halves
        .iter()
        .map(|h| h.iter().sum::<f64>() / len)
        .collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = len / (m - 1.0) * means.iter().map(|mu| (mu - grand) * (mu - grand)).sum::<f64>();
    let within = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (len - 1.0))
        .sum::<f64>()
        / m;
    if within <= 0.0 {
        return if between <= f64::EPSILON { 1.0 } else { f64::INFINITY };
    }
    math::sqrt(((len - 1.0) / len * within + between / len) / within)
}
