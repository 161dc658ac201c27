//! On-disk artifact formats shared by the subcommands.
//!
//! A `fit` run leaves three files in its output directory:
//!
//! * `posterior.csv` — retained draws, one row per iteration per chain:
//!   `chain,iteration,beta,gamma,r,i0,log_posterior`.
//! * `fit_report.json` — summaries, diagnostics and the full configuration
//!   (including the seed) that produced the run.
//! * `envelope.csv` — per-day observed interest, posterior-predictive
//!   quantiles and the effective-reproduction-number band.
//!
//! `simulate` writes `trajectory.csv` or `ensemble.csv` plus
//! `peak_timing.json`; `validate` writes `validation_report.json`; `report`
//! renders `summary.txt` and optional SVGs from the stored files. Floats are
//! written with Rust's shortest round-trip formatting, so re-reading an
//! artifact reproduces the original values bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sirfit_core::analysis::{EffectiveRBand, ParamSummary, PeakTiming, PredictiveEnvelope};
use sirfit_core::mcmc::Draw;
use sirfit_core::{McmcConfig, ObservationWindow, PosteriorSamples, SirParams, Trajectory};

use crate::config::RunConfig;
use crate::{io_err, Error, Result};

/// Retained posterior draws.
pub const POSTERIOR_FILE: &str = "posterior.csv";
/// Fit summaries, diagnostics and configuration.
pub const REPORT_FILE: &str = "fit_report.json";
/// Observed data with predictive and effective-R bands.
pub const ENVELOPE_FILE: &str = "envelope.csv";
/// Single-parameter-set simulation output.
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
/// Posterior-ensemble simulation quantiles.
pub const ENSEMBLE_FILE: &str = "ensemble.csv";
/// Peak-timing distribution.
pub const PEAK_FILE: &str = "peak_timing.json";
/// Out-of-sample validation scores.
pub const VALIDATION_FILE: &str = "validation_report.json";
/// Human-readable run summary.
pub const SUMMARY_FILE: &str = "summary.txt";

/// A credible interval as stored in reports.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CredibleJson {
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
}

/// Credible summaries for the fitted and derived parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SummaryJson {
    pub r0: CredibleJson,
    pub generation_time: CredibleJson,
    pub beta: CredibleJson,
    pub gamma: CredibleJson,
    pub r: CredibleJson,
    pub i0: CredibleJson,
}

/// One parameter draw with its log posterior density.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DrawJson {
    pub beta: f64,
    pub gamma: f64,
    pub r: f64,
    pub i0: f64,
    pub log_posterior: f64,
}

/// Between-chain convergence diagnostics, ordered beta, gamma, r, i0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsJson {
    pub ess: [f64; 4],
    pub split_rhat: [f64; 4],
}

/// Peak-timing ensemble results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakJson {
    pub mean_day: f64,
    pub sd_day: f64,
    pub n_draws: usize,
    pub i0: f64,
    pub horizon: usize,
    pub days: Vec<usize>,
}

/// The self-describing record of one `fit` run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub label: String,
    /// ISO date of the first observation.
    pub start_date: String,
    pub n_observations: usize,
    /// Full configuration, including the seed, that produced the run.
    pub config: RunConfig,
    pub acceptance_rates: Vec<f64>,
    /// Present only for multi-chain runs.
    pub diagnostics: Option<DiagnosticsJson>,
    pub summary: SummaryJson,
    pub map: DrawJson,
    pub r2_in_sample: f64,
    pub r2_out_sample: Option<f64>,
    /// Probability a single-case introduction dies out, at the median R0.
    pub extinction_probability: f64,
    /// First day the median effective R drops below one.
    pub crossing_day: Option<usize>,
    /// Projected peak timing; absent when no interior peak exists.
    pub peak: Option<PeakJson>,
}

/// Validation scores against one or two observation windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationJson {
    pub map: DrawJson,
    pub r2_in_sample: f64,
    pub r2_out_sample: Option<f64>,
}

/// `envelope.csv` read back into columns. Day 0 carries only the
/// effective-R band (observations start on day 1).
#[derive(Debug, Clone, Default)]
pub struct EnvelopeTable {
    pub days: Vec<usize>,
    pub observed: Vec<Option<f64>>,
    pub median: Vec<Option<f64>>,
    pub lower95: Vec<Option<f64>>,
    pub upper95: Vec<Option<f64>>,
    pub rt_median: Vec<f64>,
    pub rt_lower95: Vec<f64>,
    pub rt_upper95: Vec<f64>,
}

impl From<sirfit_core::analysis::CredibleSummary> for CredibleJson {
    fn from(s: sirfit_core::analysis::CredibleSummary) -> Self {
        Self {
            median: s.median,
            lower95: s.lower95,
            upper95: s.upper95,
        }
    }
}

impl From<&ParamSummary> for SummaryJson {
    fn from(s: &ParamSummary) -> Self {
        Self {
            r0: s.r0.into(),
            generation_time: s.generation_time.into(),
            beta: s.beta.into(),
            gamma: s.gamma.into(),
            r: s.r.into(),
            i0: s.i0.into(),
        }
    }
}

impl From<&Draw> for DrawJson {
    fn from(d: &Draw) -> Self {
        Self {
            beta: d.params.beta,
            gamma: d.params.gamma,
            r: d.params.r,
            i0: d.params.i0,
            log_posterior: d.log_posterior,
        }
    }
}

/// Builds the peak-timing artifact from the core result plus the settings
/// that produced it.
#[must_use]
pub fn peak_json(peak: &PeakTiming, i0: f64, horizon: usize) -> PeakJson {
    PeakJson {
        mean_day: peak.mean_day,
        sd_day: peak.sd_day,
        n_draws: peak.days.len(),
        i0,
        horizon,
        days: peak.days.clone(),
    }
}

/// Writes retained draws from every chain as
/// `chain,iteration,beta,gamma,r,i0,log_posterior`.
pub fn write_posterior(path: &Path, chains: &[PosteriorSamples]) -> Result<()> {
    let mut out = String::from("chain,iteration,beta,gamma,r,i0,log_posterior\n");
    for (chain_idx, chain) in chains.iter().enumerate() {
        for (iter_idx, draw) in chain.draws.iter().enumerate() {
            let p = &draw.params;
            let _ = writeln!(
                out,
                "{chain_idx},{iter_idx},{},{},{},{},{}",
                p.beta, p.gamma, p.r, p.i0, draw.log_posterior
            );
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Reads a posterior CSV back into per-chain draw sets. Acceptance rates are
/// not stored in the CSV and come back as NaN; the fit report keeps them.
pub fn read_posterior(path: &Path) -> Result<Vec<PosteriorSamples>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut chains: Vec<(u64, Vec<Draw>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            line: e.position().map_or(0, csv::Position::line),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        let field = |idx: usize, name: &str| -> Result<f64> {
            record
                .get(idx)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Csv {
                    path: path.to_path_buf(),
                    line,
                    message: format!("bad {name} field"),
                })
        };
        let chain_id = record
            .get(0)
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| Error::Csv {
                path: path.to_path_buf(),
                line,
                message: "bad chain field".to_string(),
            })?;
        let params = SirParams::new(
            field(2, "beta")?,
            field(3, "gamma")?,
            field(4, "r")?,
            field(5, "i0")?,
        )?;
        let draw = Draw {
            params,
            log_posterior: field(6, "log_posterior")?,
        };
        match chains.last_mut() {
            Some((id, draws)) if *id == chain_id => draws.push(draw),
            _ => chains.push((chain_id, vec![draw])),
        }
    }
    if chains.is_empty() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: "no posterior draws".to_string(),
        });
    }
    Ok(chains
        .into_iter()
        .map(|(_, draws)| PosteriorSamples {
            draws,
            acceptance_rate: f64::NAN,
            config: McmcConfig::default(),
        })
        .collect())
}

/// Pools every chain from a posterior CSV into one draw set.
pub fn read_pooled_posterior(path: &Path) -> Result<PosteriorSamples> {
    let chains = read_posterior(path)?;
    Ok(pool(&chains))
}

/// Concatenates chains into a single draw set; the acceptance rate is the
/// draw-weighted mean.
#[must_use]
pub fn pool(chains: &[PosteriorSamples]) -> PosteriorSamples {
    let draws: Vec<Draw> = chains.iter().flat_map(|c| c.draws.clone()).collect();
    let total = draws.len().max(1) as f64;
    let acceptance_rate = chains
        .iter()
        .map(|c| c.acceptance_rate * c.draws.len() as f64)
        .sum::<f64>()
        / total;
    PosteriorSamples {
        draws,
        acceptance_rate,
        config: chains.first().map(|c| c.config).unwrap_or_default(),
    }
}

/// Writes the per-day table of observations, posterior-predictive quantiles
/// and the effective-R band. Day 0 predates the first observation, so its
/// observation columns are empty.
pub fn write_envelope(
    path: &Path,
    window: &ObservationWindow,
    envelope: &PredictiveEnvelope,
    rt: &EffectiveRBand,
) -> Result<()> {
    let mut out =
        String::from("day,observed,median,lower95,upper95,rt_median,rt_lower95,rt_upper95\n");
    let _ = writeln!(
        out,
        "0,,,,,{},{},{}",
        rt.median[0], rt.lower95[0], rt.upper95[0]
    );
    for (idx, obs) in window.observations().iter().enumerate() {
        let day = idx + 1;
        let _ = writeln!(
            out,
            "{day},{obs},{},{},{},{},{},{}",
            envelope.median[idx],
            envelope.lower95[idx],
            envelope.upper95[idx],
            rt.median[day],
            rt.lower95[day],
            rt.upper95[day]
        );
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Reads `envelope.csv` back into columns.
pub fn read_envelope(path: &Path) -> Result<EnvelopeTable> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut table = EnvelopeTable::default();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            line: e.position().map_or(0, csv::Position::line),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        let bad = |name: &str| Error::Csv {
            path: path.to_path_buf(),
            line,
            message: format!("bad {name} field"),
        };
        let opt = |idx: usize, name: &str| -> Result<Option<f64>> {
            match record.get(idx) {
                None | Some("") => Ok(None),
                Some(s) => s.parse::<f64>().map(Some).map_err(|_| bad(name)),
            }
        };
        let num = |idx: usize, name: &str| -> Result<f64> {
            opt(idx, name)?.ok_or_else(|| bad(name))
        };
        table.days.push(
            record
                .get(0)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| bad("day"))?,
        );
        table.observed.push(opt(1, "observed")?);
        table.median.push(opt(2, "median")?);
        table.lower95.push(opt(3, "lower95")?);
        table.upper95.push(opt(4, "upper95")?);
        table.rt_median.push(num(5, "rt_median")?);
        table.rt_lower95.push(num(6, "rt_lower95")?);
        table.rt_upper95.push(num(7, "rt_upper95")?);
    }
    if table.days.is_empty() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: "no envelope rows".to_string(),
        });
    }
    Ok(table)
}

/// Writes a deterministic trajectory as `day,s,i,rec,c,incidence`.
pub fn write_trajectory(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let mut out = String::from("day,s,i,rec,c,incidence\n");
    let incidence = trajectory.daily_incidence();
    for (day, state) in trajectory.states().iter().enumerate() {
        let inc = if day == 0 {
            String::new()
        } else {
            incidence[day - 1].to_string()
        };
        let _ = writeln!(
            out,
            "{day},{},{},{},{},{inc}",
            state.s, state.i, state.rec, state.c
        );
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Writes per-day interest quantiles of a simulated ensemble as
/// `day,median,lower95,upper95` (days start at 1).
pub fn write_ensemble(
    path: &Path,
    median: &[f64],
    lower95: &[f64],
    upper95: &[f64],
) -> Result<()> {
    let mut out = String::from("day,median,lower95,upper95\n");
    for (idx, ((m, lo), hi)) in median.iter().zip(lower95).zip(upper95).enumerate() {
        let _ = writeln!(out, "{},{m},{lo},{hi}", idx + 1);
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Serializes a JSON artifact with a stable field order and trailing
/// newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// Reads a JSON artifact.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Returns the subset of `names` missing from `dir`.
#[must_use]
pub fn missing_artifacts(dir: &Path, names: &[&str]) -> Vec<PathBuf> {
    names
        .iter()
        .map(|name| dir.join(name))
        .filter(|path| !path.exists())
        .collect()
}
