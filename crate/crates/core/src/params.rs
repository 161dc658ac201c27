//! Transmission parameter vectors and the scalar quantities derived from
//! them.

use crate::error::Error;
use crate::Result;

/// Parameters of the SIR transmission model with a Poisson interest
/// observation layer.
///
/// Rates are per day and compartments are proportions of the susceptible
/// population, so `beta / gamma` is dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirParams {
    /// Transmission rate (per day), `> 0`.
    pub beta: f64,
    /// Recovery rate (per day), `> 0`; `1 / gamma` is the mean infectious
    /// period, interpreted as the generation time.
    pub gamma: f64,
    /// Reporting scale: expected interest per percentage point of daily
    /// incidence, `> 0`.
    pub r: f64,
    /// Initially infectious proportion, in `(0, 1)`.
    pub i0: f64,
}

impl SirParams {
    /// Builds a parameter vector, rejecting values outside the model domain.
    pub fn new(beta: f64, gamma: f64, r: f64, i0: f64) -> Result<Self> {
        let check_rate = |name: &'static str, value: f64| -> Result<()> {
            if !value.is_finite() {
                return Err(Error::InvalidParam {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
            if value <= 0.0 {
                return Err(Error::InvalidParam {
                    name,
                    value,
                    reason: "must be positive",
                });
            }
            Ok(())
        };
        check_rate("beta", beta)?;
        check_rate("gamma", gamma)?;
        check_rate("r", r)?;
        if !i0.is_finite() || i0 <= 0.0 || i0 >= 1.0 {
            return Err(Error::InvalidParam {
                name: "i0",
                value: i0,
                reason: "must lie strictly between 0 and 1",
            });
        }
        Ok(Self { beta, gamma, r, i0 })
    }

    /// Basic reproduction number `R0 = beta / gamma`.
    #[must_use]
    pub fn r0(&self) -> f64 {
        self.beta / self.gamma
    }

    /// Mean infectious period `1 / gamma` in days, reported as the
    /// generation time of the process.
    #[must_use]
    pub fn generation_time(&self) -> f64 {
        1.0 / self.gamma
    }
}
