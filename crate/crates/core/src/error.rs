//! Failure modes shared by the dynamics, observation, sampling and analysis
//! layers.

use alloc::string::String;

/// Errors produced by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter vector lies outside the model's domain.
    #[error("invalid parameter {name}: {value} ({reason})")]
    InvalidParam {
        /// Name of the offending parameter.
        name: &'static str,
        /// The rejected value.
        value: f64,
        /// Why it was rejected.
        reason: &'static str,
    },

    /// An observation window could not be built from the given values.
    #[error("invalid observation window: {0}")]
    InvalidWindow(String),

    /// A daily state sequence violates the model's structural guarantees
    /// (proportions in `[0, 1]`, `s` non-increasing, `c` non-decreasing)
    /// by more than integration noise.
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    /// The adaptive integrator drove the step size below the representable
    /// minimum; `t` is the integration time at which it happened.
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow {
        /// Integration time of the failure.
        t: f64,
    },

    /// The integrator exceeded its step budget before reaching the horizon.
    #[error("integration exceeded {max_steps} steps at t = {t}")]
    TooManySteps {
        /// Step budget that was exhausted.
        max_steps: usize,
        /// Integration time reached.
        t: f64,
    },

    /// No starting point with a finite posterior was found.
    #[error("no finite starting point after {attempts} attempts")]
    ChainInit {
        /// Number of rejected initial points.
        attempts: usize,
    },

    /// An operation needed more posterior draws than were supplied.
    #[error("{needed}+ draws required, got {got}")]
    TooFewDraws {
        /// Minimum number of draws required.
        needed: usize,
        /// Number of draws supplied.
        got: usize,
    },

    /// Convergence diagnostics need at least two chains.
    #[error("at least 2 chains required for scale-reduction diagnostics, got {got}")]
    TooFewChains {
        /// Number of chains supplied.
        got: usize,
    },

    /// Daily incidence kept rising through the simulation horizon even after
    /// extending it, so no interior peak day exists.
    #[error("no interior incidence peak within {horizon} days (after extension)")]
    NoInteriorPeak {
        /// Final horizon that was searched.
        horizon: usize,
    },

    /// A quantity that must be finite was not.
    #[error("non-finite value in {context}")]
    NonFinite {
        /// Description of where the value appeared.
        context: &'static str,
    },
}
