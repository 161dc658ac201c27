//! Deterministic SIR dynamics in proportions, integrated with an adaptive
//! Dormand–Prince 4(5) scheme and sampled on a daily grid.
//!
//! The state is `(s, i, rec, c)`: susceptible, infectious and recovered
//! proportions plus cumulative incidence `c` (everyone ever infected,
//! including the initial seed). The flow is
//!
//! ```text
//! ds/dt   = -beta * s * i
//! di/dt   =  beta * s * i - gamma * i
//! drec/dt =  gamma * i
//! dc/dt   =  beta * s * i
//! ```
//!
//! `s + i + rec` is a linear invariant of the flow, so the Runge–Kutta
//! solution conserves it to rounding error.

use alloc::format;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math;
use crate::params::SirParams;
use crate::Result;

/// Compartment proportions on one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirState {
    /// Susceptible proportion.
    pub s: f64,
    /// Infectious proportion.
    pub i: f64,
    /// Recovered proportion.
    pub rec: f64,
    /// Cumulative incidence: proportion ever infected, including the seed.
    pub c: f64,
}

impl SirState {
    fn from_vector(y: [f64; 4]) -> Self {
        Self {
            s: y[0],
            i: y[1],
            rec: y[2],
            c: y[3],
        }
    }
}

/// Tolerances and step budget for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Relative tolerance per step.
    pub rtol: f64,
    /// Absolute tolerance per step.
    pub atol: f64,
    /// Budget of attempted steps before the integration is abandoned.
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-8,
            max_steps: 200_000,
        }
    }
}

/// A solution sampled at integer days `0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<SirState>,
}

/// Slack allowed when snapping near-boundary or near-monotone values that
/// differ only by integration noise; larger violations are reported as
/// errors.
const TRAJECTORY_SLACK: f64 = 1e-6;

impl Trajectory {
    /// Builds a trajectory from daily states.
    ///
    /// Values are allowed to stray from `[0, 1]`, `s`/`c` from exact
    /// monotonicity, and `rec` from the conservation identity
    /// `rec = 1 - s - i`, by at most [`TRAJECTORY_SLACK`] (integration
    /// noise); such values are snapped. Larger violations are rejected.
    pub fn from_daily_states(states: Vec<SirState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidTrajectory("no states".into()));
        }
        let mut clean = Vec::with_capacity(states.len());
        for (day, raw) in states.into_iter().enumerate() {
            let mut st = raw;
            for (name, value) in [("s", st.s), ("i", st.i), ("rec", st.rec), ("c", st.c)] {
                if !value.is_finite() || !(-TRAJECTORY_SLACK..=1.0 + TRAJECTORY_SLACK).contains(&value) {
                    return Err(Error::InvalidTrajectory(format!(
                        "{name} = {value} out of [0, 1] on day {day}"
                    )));
                }
            }
            st.s = st.s.clamp(0.0, 1.0);
            st.i = st.i.clamp(0.0, 1.0);
            st.c = st.c.clamp(0.0, 1.0);
            if let Some(prev) = clean.last() {
                let prev: &SirState = prev;
                if st.s > prev.s + TRAJECTORY_SLACK {
                    return Err(Error::InvalidTrajectory(format!(
                        "s rises from {} to {} on day {day}",
                        prev.s, st.s
                    )));
                }
                if st.c < prev.c - TRAJECTORY_SLACK {
                    return Err(Error::InvalidTrajectory(format!(
                        "c falls from {} to {} on day {day}",
                        prev.c, st.c
                    )));
                }
                st.s = st.s.min(prev.s);
                st.c = st.c.max(prev.c);
            }
            let remainder = 1.0 - st.s - st.i;
            if (st.rec - remainder).abs() > TRAJECTORY_SLACK {
                return Err(Error::InvalidTrajectory(format!(
                    "s + i + rec = {} deviates from 1 on day {day}",
                    st.s + st.i + st.rec
                )));
            }
            st.rec = remainder.clamp(0.0, 1.0);
            clean.push(st);
        }
        Ok(Self { states: clean })
    }

    /// Number of days after day 0.
    #[must_use]
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// All states, indexed by day.
    #[must_use]
    pub fn states(&self) -> &[SirState] {
        &self.states
    }

    /// State on the given day (`0..=horizon`).
    #[must_use]
    pub fn state(&self, day: usize) -> SirState {
        self.states[day]
    }

    /// Daily new-infection proportions `c_t = C(t) - C(t-1)` for
    /// `t = 1..=horizon`; non-negative by construction.
    #[must_use]
    pub fn daily_incidence(&self) -> Vec<f64> {
        self.states
            .windows(2)
            .map(|w| (w[1].c - w[0].c).max(0.0))
            .collect()
    }
}

/// Time derivatives `(ds, di, drec, dc)` of the SIR flow at one state.
#[must_use]
pub fn derivatives(state: &SirState, params: &SirParams) -> [f64; 4] {
    rhs(params.beta, params.gamma, &[state.s, state.i, state.rec, state.c])
}

#[inline]
fn rhs(beta: f64, gamma: f64, y: &[f64; 4]) -> [f64; 4] {
    let flow = beta * y[0] * y[1];
    let recovery = gamma * y[1];
    [-flow, flow - recovery, recovery, flow]
}

/// Integrates the SIR system over `horizon` whole days with default
/// tolerances, starting from `s = 1 - i0`, `i = i0`, `rec = 0`, `c = i0`.
pub fn integrate(params: &SirParams, horizon: usize) -> Result<Trajectory> {
    integrate_with(params, horizon, &IntegratorOptions::default())
}

// Dormand–Prince 4(5) coefficients (Hairer, Nørsett & Wanner ordering).
// The SIR flow is autonomous, so the stage times c2..c5 never appear.
const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output coefficients.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// Step-size controller settings.
const SAFE: f64 = 0.9;
const PI_BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - PI_BETA * 0.75;
const FACC1: f64 = 5.0; // reciprocal of the max shrink factor 0.2
const FACC2: f64 = 0.1; // reciprocal of the max growth factor 10
const UROUND: f64 = f64::EPSILON;

/// Integrates the SIR system over `horizon` whole days with the given
/// tolerances, sampling the dense output at every integer day.
pub fn integrate_with(
    params: &SirParams,
    horizon: usize,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidParam {
            name: "horizon",
            value: 0.0,
            reason: "must be at least one day",
        });
    }
    if !opts.rtol.is_finite() || opts.rtol <= 0.0 {
        return Err(Error::InvalidParam {
            name: "rtol",
            value: opts.rtol,
            reason: "must be a positive real",
        });
    }
    if !opts.atol.is_finite() || opts.atol <= 0.0 {
        return Err(Error::InvalidParam {
            name: "atol",
            value: opts.atol,
            reason: "must be a positive real",
        });
    }
    let beta = params.beta;
    let gamma = params.gamma;
    let t_end = horizon as f64;

    let mut t = 0.0_f64;
    let mut y = [1.0 - params.i0, params.i0, 0.0, params.i0];
    let mut k1 = rhs(beta, gamma, &y);
    let mut h = 0.01_f64.min(t_end);
    let mut facold = 1e-4_f64;
    let mut rejected = false;

    let mut states = Vec::with_capacity(horizon + 1);
    states.push(SirState::from_vector(y));
    let mut next_day = 1usize;

    let mut attempted = 0usize;
    while next_day <= horizon {
        if attempted >= opts.max_steps {
            return Err(Error::TooManySteps {
                max_steps: opts.max_steps,
                t,
            });
        }
        attempted += 1;
        if 0.1 * h <= t * UROUND {
            return Err(Error::StepSizeUnderflow { t });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        // The six intermediate stages; k1 is carried over (FSAL).
        let mut y2 = [0.0; 4];
        for j in 0..4 {
            y2[j] = y[j] + h * A21 * k1[j];
        }
        let k2 = rhs(beta, gamma, &y2);
        let mut y3 = [0.0; 4];
        for j in 0..4 {
            y3[j] = y[j] + h * (A31 * k1[j] + A32 * k2[j]);
        }
        let k3 = rhs(beta, gamma, &y3);
        let mut y4 = [0.0; 4];
        for j in 0..4 {
            y4[j] = y[j] + h * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j]);
        }
        let k4 = rhs(beta, gamma, &y4);
        let mut y5 = [0.0; 4];
        for j in 0..4 {
            y5[j] = y[j] + h * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j]);
        }
        let k5 = rhs(beta, gamma, &y5);
        let mut y6 = [0.0; 4];
        for j in 0..4 {
            y6[j] =
                y[j] + h * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j]);
        }
        let k6 = rhs(beta, gamma, &y6);
        let mut y_next = [0.0; 4];
        for j in 0..4 {
            y_next[j] = y[j]
                + h * (A71 * k1[j] + A73 * k3[j] + A74 * k4[j] + A75 * k5[j] + A76 * k6[j]);
        }
        let k7 = rhs(beta, gamma, &y_next);

        let mut err = 0.0_f64;
        for j in 0..4 {
            let sk = opts.atol + opts.rtol * y[j].abs().max(y_next[j].abs());
            let e = h
                * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j]);
            err += (e / sk) * (e / sk);
        }
        err = math::sqrt(err / 4.0);
        if !err.is_finite() {
            // Treat a blow-up inside the stages as a failed step and shrink.
            err = 1e10;
        }

        let fac11 = math::powf(err, EXPO1);
        if err <= 1.0 {
            // Accepted.
            let t_new = if last { t_end } else { t + h };
            if (next_day as f64) <= t_new {
                // Fourth-order dense interpolation over [t, t_new].
                let mut cont = [[0.0_f64; 4]; 5];
                for j in 0..4 {
                    let ydiff = y_next[j] - y[j];
                    let bspl = h * k1[j] - ydiff;
                    cont[0][j] = y[j];
                    cont[1][j] = ydiff;
                    cont[2][j] = bspl;
                    cont[3][j] = ydiff - h * k7[j] - bspl;
                    cont[4][j] = h
                        * (D1 * k1[j]
                            + D3 * k3[j]
                            + D4 * k4[j]
                            + D5 * k5[j]
                            + D6 * k6[j]
                            + D7 * k7[j]);
                }
                while next_day <= horizon && (next_day as f64) <= t_new {
                    let d = next_day as f64;
                    let sampled = if d == t_new {
                        y_next
                    } else {
                        let theta = (d - t) / h;
                        let theta1 = 1.0 - theta;
                        let mut out = [0.0; 4];
                        for j in 0..4 {
                            out[j] = cont[0][j]
                                + theta
                                    * (cont[1][j]
                                        + theta1
                                            * (cont[2][j]
                                                + theta * (cont[3][j] + theta1 * cont[4][j])));
                        }
                        out
                    };
                    states.push(SirState::from_vector(sampled));
                    next_day += 1;
                }
            }

            let mut fac = fac11 / math::powf(facold, PI_BETA);
            fac = FACC2.max(FACC1.min(fac / SAFE));
            let mut h_new = h / fac;
            if rejected {
                h_new = h_new.min(h);
            }
            facold = err.max(1e-4);
            rejected = false;
            t = t_new;
            y = y_next;
            k1 = k7;
            h = h_new;
        } else {
            h /= FACC1.min(fac11 / SAFE);
            rejected = true;
        }
    }

    Trajectory::from_daily_states(states)
}

/// Effective reproduction number `R(t) = R0 * S(t)` on each day of the
/// trajectory, starting from `R(0) = R0 * (1 - i0)`.
#[must_use]
pub fn effective_r(trajectory: &Trajectory, params: &SirParams) -> Vec<f64> {
    let r0 = params.r0();
    trajectory.states().iter().map(|st| r0 * st.s).collect()
}

/// Solves the final-size relation `z = 1 - s0 * exp(-r0 * z)` by damped
/// fixed-point iteration.
///
/// `z` is the proportion ever infected in the limit `t -> inf` when a
/// proportion `1 - s0` is initially infectious. For `r0 * s0 <= 1` with
/// `s0 = 1` this is the no-outbreak root `z = 0`.
pub fn final_size_oracle(r0: f64, s0: f64) -> Result<f64> {
    if !r0.is_finite() || r0 < 0.0 {
        return Err(Error::InvalidParam {
            name: "r0",
            value: r0,
            reason: "must be finite and non-negative",
        });
    }
    if !s0.is_finite() || !(0.0..=1.0).contains(&s0) {
        return Err(Error::InvalidParam {
            name: "s0",
            value: s0,
            reason: "must lie in [0, 1]",
        });
    }
    if r0 * s0 <= 1.0 && 1.0 - s0 <= 1e-12 {
        return Ok(0.0);
    }
    // The map F(z) = 1 - s0 exp(-r0 z) is increasing and concave with a
    // unique fixed point in (0, 1], so the damped iteration converges
    // monotonically from either side.
    let damping = 0.5;
    let mut z = 0.5_f64;
    for _ in 0..100_000 {
        let next = z + damping * ((1.0 - s0 * math::exp(-r0 * z)) - z);
        let delta = (next - z).abs();
        z = next;
        if delta <= 1e-10 {
            break;
        }
    }
    Ok(z)
}
