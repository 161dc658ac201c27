//! Run configuration: defaults, a flat `key = value` config-file format
//! mirroring the command-line flags, and validation.
//!
//! Precedence is fixed: defaults, then the config file (if any), then
//! explicit flags. The seed is deliberately not defaulted — a `fit` run must
//! state one, so no run is silently nondeterministic.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Settings for a fitting run. See the module docs for precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Interest CSV to fit.
    pub input: Option<PathBuf>,
    /// Optional second series scored out-of-sample.
    pub validation: Option<PathBuf>,
    /// Directory receiving all artifacts. Never serialized into reports:
    /// an artifact's location is already evident to whoever reads it, and
    /// embedding the path would make otherwise-identical runs produce
    /// different bytes depending on where they were written.
    #[serde(skip)]
    pub out_dir: PathBuf,
    /// RNG seed; mandatory for `fit`.
    pub seed: Option<u64>,
    /// Independent chains (seeded `seed`, `seed + 1`, ...).
    pub chains: usize,
    /// Discarded adaptation iterations per chain.
    pub burn_in: usize,
    /// Retained iterations per chain.
    pub samples: usize,
    /// Keep every `thin`-th retained iteration.
    pub thin: usize,
    /// Initial proposal step sizes on the working scale
    /// (log beta, log gamma, log r, logit i0).
    pub step_sizes: [f64; 4],
    /// Posterior draws used for predictive envelopes and peak timing.
    pub ensemble: usize,
    /// Prior mean of the infectious period (days).
    pub prior_mean: f64,
    /// Prior variance of the infectious period (days squared).
    pub prior_var: f64,
    /// Initial infectious proportion for projected outbreaks.
    pub i0: f64,
    /// Projection horizon in days for peak timing.
    pub horizon: usize,
    /// Whether `report` renders SVG plots.
    pub emit_svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            validation: None,
            out_dir: PathBuf::from("sirfit-out"),
            seed: None,
            chains: 2,
            burn_in: 10_000,
            samples: 40_000,
            thin: 1,
            step_sizes: [0.1; 4],
            ensemble: 1_000,
            prior_mean: 1.0,
            prior_var: 0.1,
            i0: 1e-3,
            horizon: 60,
            emit_svg: false,
        }
    }
}

impl RunConfig {
    /// Applies a flat `key = value` config file on top of the current
    /// settings. Keys mirror the long flags (`burn-in`, `out-dir`, ...);
    /// `_` may be used in place of `-`. Lines that are blank or start with
    /// `#` are skipped. Unknown keys and unparseable values are errors.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(crate::io_err(path))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_err(path, idx + 1, "expected `key = value`"));
            };
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            self.set(&key, value)
                .map_err(|msg| config_err(path, idx + 1, &msg))?;
        }
        Ok(())
    }

    /// Sets one field by flag name. Returns a message (without location) on
    /// unknown keys or bad values.
    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse::<T>()
                .map_err(|_| format!("bad value '{value}' for {key}"))
        }
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "validation" => self.validation = Some(PathBuf::from(value)),
            "out-dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = Some(parse(key, value)?),
            "chains" => self.chains = parse(key, value)?,
            "burn-in" => self.burn_in = parse(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "thin" => self.thin = parse(key, value)?,
            "step-sizes" => self.step_sizes = parse_step_sizes(value)?,
            "ensemble" => self.ensemble = parse(key, value)?,
            "prior-mean" => self.prior_mean = parse(key, value)?,
            "prior-var" => self.prior_var = parse(key, value)?,
            "i0" => self.i0 = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "emit-svg" => {
                self.emit_svg = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    other => return Err(format!("bad value '{other}' for emit-svg")),
                }
            }
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Checks that the merged settings form a runnable `fit` configuration.
    pub fn validate_for_fit(&self) -> Result<()> {
        let mut problems = Vec::new();
        match &self.input {
            None => problems.push("--input is required".to_string()),
            Some(path) if !path.exists() => {
                problems.push(format!("input file {} does not exist", path.display()));
            }
            Some(_) => {}
        }
        if let Some(path) = &self.validation {
            if !path.exists() {
                problems.push(format!("validation file {} does not exist", path.display()));
            }
        }
        if self.seed.is_none() {
            problems.push("--seed is required for fit (runs must be reproducible)".to_string());
        }
        if self.chains == 0 {
            problems.push("--chains must be at least 1".to_string());
        }
        if self.samples == 0 {
            problems.push("--samples must be at least 1".to_string());
        }
        if self.thin == 0 {
            problems.push("--thin must be at least 1".to_string());
        }
        if !self.step_sizes.iter().all(|&s| s.is_finite() && s > 0.0) {
            problems.push("step sizes must be positive".to_string());
        }
        if self.ensemble == 0 {
            problems.push("--ensemble must be at least 1".to_string());
        }
        if !(self.prior_mean.is_finite() && self.prior_mean > 0.0) {
            problems.push("--prior-mean must be positive".to_string());
        }
        if !(self.prior_var.is_finite() && self.prior_var > 0.0) {
            problems.push("--prior-var must be positive".to_string());
        }
        if !(self.i0.is_finite() && self.i0 > 0.0 && self.i0 < 1.0) {
            problems.push("--i0 must lie in (0, 1)".to_string());
        }
        if self.horizon < 2 {
            problems.push("--horizon must be at least 2".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            let mut message = String::from("invalid configuration:");
            for p in &problems {
                let _ = write!(message, "\n  - {p}");
            }
            Err(Error::Usage(message))
        }
    }
}

/// Parses `--step-sizes`: either one positive real applied to every
/// coordinate or four comma-separated values.
pub fn parse_step_sizes(value: &str) -> std::result::Result<[f64; 4], String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let parse_one = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| format!("bad step size '{s}'"))
    };
    match parts.as_slice() {
        [one] => Ok([parse_one(one)?; 4]),
        [a, b, c, d] => Ok([parse_one(a)?, parse_one(b)?, parse_one(c)?, parse_one(d)?]),
        _ => Err(format!(
            "expected 1 or 4 comma-separated step sizes, found {}",
            parts.len()
        )),
    }
}

fn config_err(path: &Path, line: usize, message: &str) -> Error {
    Error::Config {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    }
}
