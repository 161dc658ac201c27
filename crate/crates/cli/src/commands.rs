//! The four subcommands: `fit`, `simulate`, `validate` and `report`.
//!
//! Commands communicate only through files. `fit` does all the expensive
//! sampling and leaves artifacts behind; the other commands re-read those
//! artifacts, so analyses can be re-run and re-plotted without refitting.
//! Every command is deterministic given its inputs, flags and seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sirfit_core::{
    diagnostics, effective_r_envelope, empirical_quantile, extinction_probability, integrate,
    peak_timing, posterior_predictive, run_chain, simulate_interest, summarize, validate,
    GammaPrior, McmcConfig, PosteriorSamples, SirParams,
};

use crate::artifacts::{
    self, peak_json, DiagnosticsJson, DrawJson, FitReport, SummaryJson, ValidationJson,
    ENSEMBLE_FILE, ENVELOPE_FILE, PEAK_FILE, POSTERIOR_FILE, REPORT_FILE, SUMMARY_FILE,
    TRAJECTORY_FILE, VALIDATION_FILE,
};
use crate::config::RunConfig;
use crate::{ingest, svg, Error, Result};

/// Offset mixed into the run seed for the posterior-predictive RNG stream,
/// keeping it distinct from the per-chain seeds `seed`, `seed + 1`, ....
const ENVELOPE_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Arguments for `simulate`.
#[derive(Debug, Clone)]
pub struct SimulateOpts {
    /// Posterior CSV for ensemble mode.
    pub posterior: Option<PathBuf>,
    /// Transmission rate for single-trajectory mode.
    pub beta: Option<f64>,
    /// Recovery rate for single-trajectory mode.
    pub gamma: Option<f64>,
    /// Reporting factor for single-trajectory mode.
    pub r: f64,
    /// Initial infectious proportion (overrides posterior draws).
    pub i0: f64,
    /// Days to simulate.
    pub horizon: usize,
    /// Draws used in ensemble mode.
    pub ensemble: usize,
    /// RNG seed for ensemble observation noise.
    pub seed: Option<u64>,
    /// Output directory.
    pub out_dir: PathBuf,
}

/// Arguments for `validate`.
#[derive(Debug, Clone)]
pub struct ValidateOpts {
    /// Posterior CSV from a `fit` run.
    pub posterior: PathBuf,
    /// In-sample interest CSV.
    pub input: PathBuf,
    /// Optional out-of-sample interest CSV.
    pub validation: Option<PathBuf>,
    /// Output directory.
    pub out_dir: PathBuf,
}

/// Arguments for `report`.
#[derive(Debug, Clone)]
pub struct ReportOpts {
    /// Directory holding the artifacts of a `fit` run.
    pub run_dir: PathBuf,
    /// Render SVG plots alongside the text summary.
    pub emit_svg: bool,
}

/// Fits the model to the configured series and writes `posterior.csv`,
/// `fit_report.json` and `envelope.csv` into the output directory.
pub fn cmd_fit(config: &RunConfig) -> Result<FitReport> {
    config.validate_for_fit()?;
    let input = config.input.as_deref().expect("validated above");
    let seed = config.seed.expect("validated above");

    let aligned = ingest::load_window(input)?;
    let window = &aligned.window;
    log::info!(
        "fitting '{}': {} observations starting {}",
        aligned.label,
        window.len(),
        aligned.start_date
    );

    let prior = GammaPrior::from_mean_var(config.prior_mean, config.prior_var)?;
    let chain_config = |chain: usize| McmcConfig {
        seed: seed.wrapping_add(chain as u64),
        burn_in: config.burn_in,
        samples: config.samples,
        thin: config.thin,
        step_sizes: config.step_sizes,
        adapt: true,
    };

    // Chains are independent; run them on their own threads and join in
    // spawn order so results are ordered deterministically.
    let chains: Vec<PosteriorSamples> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.chains)
            .map(|chain| {
                let cfg = chain_config(chain);
                scope.spawn(move || run_chain(window, &prior, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect::<sirfit_core::Result<Vec<_>>>()
    })?;
    for (idx, chain) in chains.iter().enumerate() {
        log::info!(
            "chain {idx}: {} draws, acceptance {:.3}",
            chain.draws.len(),
            chain.acceptance_rate
        );
    }

    let pooled = artifacts::pool(&chains);
    let summary = summarize(&pooled)?;

    let diag = if chains.len() >= 2 {
        match diagnostics(&chains) {
            Ok(d) => Some(DiagnosticsJson {
                ess: d.ess,
                split_rhat: d.split_rhat,
            }),
            Err(err) => {
                log::warn!("skipping convergence diagnostics: {err}");
                None
            }
        }
    } else {
        None
    };

    let mut envelope_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(ENVELOPE_SEED_SALT));
    let envelope = posterior_predictive(&pooled, window, config.ensemble, &mut envelope_rng)?;
    let rt = effective_r_envelope(&pooled, window)?;

    let out_window = config
        .validation
        .as_deref()
        .map(ingest::load_window)
        .transpose()?;
    let scores = validate(&pooled, window, out_window.as_ref().map(|a| &a.window))?;

    let peak = match peak_timing(&pooled, config.ensemble, config.i0, config.horizon) {
        Ok(p) => Some(peak_json(&p, config.i0, config.horizon)),
        Err(sirfit_core::Error::NoInteriorPeak { horizon }) => {
            log::warn!("no interior incidence peak within {horizon} days; omitting peak timing");
            None
        }
        Err(err) => return Err(err.into()),
    };

    let report = FitReport {
        label: aligned.label.clone(),
        start_date: aligned.start_date.to_string(),
        n_observations: window.len(),
        config: config.clone(),
        acceptance_rates: chains.iter().map(|c| c.acceptance_rate).collect(),
        diagnostics: diag,
        summary: SummaryJson::from(&summary),
        map: DrawJson::from(&scores.map),
        r2_in_sample: scores.r2_in_sample,
        r2_out_sample: scores.r2_out_sample,
        extinction_probability: extinction_probability(summary.r0.median)?,
        crossing_day: rt.crossing_day,
        peak,
    };

    // All computation is done; write everything at the end.
    std::fs::create_dir_all(&config.out_dir).map_err(crate::io_err(&config.out_dir))?;
    artifacts::write_posterior(&config.out_dir.join(POSTERIOR_FILE), &chains)?;
    artifacts::write_json(&config.out_dir.join(REPORT_FILE), &report)?;
    artifacts::write_envelope(&config.out_dir.join(ENVELOPE_FILE), window, &envelope, &rt)?;
    Ok(report)
}

/// Simulates either one deterministic trajectory (explicit rates) or an
/// observation-noise ensemble from a stored posterior, plus peak timing.
pub fn cmd_simulate(opts: &SimulateOpts) -> Result<()> {
    if opts.horizon < 2 {
        return Err(Error::Usage(
            "--horizon must be at least 2 days".to_string(),
        ));
    }
    if !(opts.i0.is_finite() && opts.i0 > 0.0 && opts.i0 < 1.0) {
        return Err(Error::Usage("--i0 must lie in (0, 1)".to_string()));
    }
    match (&opts.posterior, opts.beta, opts.gamma) {
        (Some(path), None, None) => simulate_ensemble(opts, path),
        (None, Some(beta), Some(gamma)) => simulate_single(opts, beta, gamma),
        _ => Err(Error::Usage(
            "give either --posterior or both --beta and --gamma".to_string(),
        )),
    }
}

/// One deterministic trajectory plus its peak day.
fn simulate_single(opts: &SimulateOpts, beta: f64, gamma: f64) -> Result<()> {
    let params = SirParams::new(beta, gamma, opts.r, opts.i0)?;
    let trajectory = integrate(&params, opts.horizon)?;
    let singleton = PosteriorSamples {
        draws: vec![sirfit_core::mcmc::Draw {
            params,
            log_posterior: 0.0,
        }],
        acceptance_rate: f64::NAN,
        config: McmcConfig::default(),
    };
    let peak = peak_timing(&singleton, 1, opts.i0, opts.horizon)?;
    std::fs::create_dir_all(&opts.out_dir).map_err(crate::io_err(&opts.out_dir))?;
    artifacts::write_trajectory(&opts.out_dir.join(TRAJECTORY_FILE), &trajectory)?;
    artifacts::write_json(
        &opts.out_dir.join(PEAK_FILE),
        &peak_json(&peak, opts.i0, opts.horizon),
    )?;
    Ok(())
}

/// Per-day interest quantiles over posterior draws with observation noise,
/// plus the peak-timing distribution.
fn simulate_ensemble(opts: &SimulateOpts, posterior: &Path) -> Result<()> {
    let Some(seed) = opts.seed else {
        return Err(Error::Usage(
            "--seed is required when simulating from a posterior".to_string(),
        ));
    };
    if opts.ensemble == 0 {
        return Err(Error::Usage("--ensemble must be at least 1".to_string()));
    }
    let pooled = artifacts::read_pooled_posterior(posterior)?;
    let available = pooled.draws.len();
    let take = opts.ensemble.min(available);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Same evenly spaced subsample as the peak-timing ensemble, so both
    // artifacts describe the same parameter sets.
    let mut simulations = Vec::with_capacity(take);
    for j in 0..take {
        let base = pooled.draws[j * available / take].params;
        let params = SirParams { i0: opts.i0, ..base };
        simulations.push(simulate_interest(&params, opts.horizon, &mut rng)?);
    }
    let mut median = Vec::with_capacity(opts.horizon);
    let mut lower95 = Vec::with_capacity(opts.horizon);
    let mut upper95 = Vec::with_capacity(opts.horizon);
    let mut day_values = Vec::with_capacity(take);
    for day in 0..opts.horizon {
        day_values.clear();
        day_values.extend(simulations.iter().map(|s| s[day]));
        median.push(empirical_quantile(&day_values, 0.5));
        lower95.push(empirical_quantile(&day_values, 0.025));
        upper95.push(empirical_quantile(&day_values, 0.975));
    }

    let peak = peak_timing(&pooled, opts.ensemble, opts.i0, opts.horizon)?;
    std::fs::create_dir_all(&opts.out_dir).map_err(crate::io_err(&opts.out_dir))?;
    artifacts::write_ensemble(
        &opts.out_dir.join(ENSEMBLE_FILE),
        &median,
        &lower95,
        &upper95,
    )?;
    artifacts::write_json(
        &opts.out_dir.join(PEAK_FILE),
        &peak_json(&peak, opts.i0, opts.horizon),
    )?;
    Ok(())
}

/// Scores a stored posterior against one or two observation series and
/// writes `validation_report.json`.
pub fn cmd_validate(opts: &ValidateOpts) -> Result<ValidationJson> {
    let pooled = artifacts::read_pooled_posterior(&opts.posterior)?;
    let in_sample = ingest::load_window(&opts.input)?;
    let out_sample = opts
        .validation
        .as_deref()
        .map(ingest::load_window)
        .transpose()?;
    let scores = validate(
        &pooled,
        &in_sample.window,
        out_sample.as_ref().map(|a| &a.window),
    )?;
    let report = ValidationJson {
        map: DrawJson::from(&scores.map),
        r2_in_sample: scores.r2_in_sample,
        r2_out_sample: scores.r2_out_sample,
    };
    std::fs::create_dir_all(&opts.out_dir).map_err(crate::io_err(&opts.out_dir))?;
    artifacts::write_json(&opts.out_dir.join(VALIDATION_FILE), &report)?;
    Ok(report)
}

/// Renders `summary.txt` (and optional SVGs) from stored artifacts and
/// returns the summary text.
pub fn cmd_report(opts: &ReportOpts) -> Result<String> {
    let missing = artifacts::missing_artifacts(
        &opts.run_dir,
        &[POSTERIOR_FILE, REPORT_FILE, ENVELOPE_FILE],
    );
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts { paths: missing });
    }
    let report: FitReport = artifacts::read_json(&opts.run_dir.join(REPORT_FILE))?;
    let table = artifacts::read_envelope(&opts.run_dir.join(ENVELOPE_FILE))?;

    let text = render_summary(&report);
    std::fs::write(opts.run_dir.join(SUMMARY_FILE), &text)
        .map_err(crate::io_err(opts.run_dir.join(SUMMARY_FILE)))?;

    // The flag or the run's own configuration can request plots.
    if opts.emit_svg || report.config.emit_svg {
        let chains = artifacts::read_posterior(&opts.run_dir.join(POSTERIOR_FILE))?;
        let pooled = artifacts::pool(&chains);
        std::fs::write(
            opts.run_dir.join("fit.svg"),
            svg::fit_plot(&table, &report.label),
        )
        .map_err(crate::io_err(opts.run_dir.join("fit.svg")))?;
        std::fs::write(
            opts.run_dir.join("effective_r.svg"),
            svg::effective_r_plot(&table),
        )
        .map_err(crate::io_err(opts.run_dir.join("effective_r.svg")))?;
        std::fs::write(
            opts.run_dir.join("posteriors.svg"),
            svg::posterior_histograms(&pooled, svg::DEFAULT_BINS),
        )
        .map_err(crate::io_err(opts.run_dir.join("posteriors.svg")))?;
    }
    Ok(text)
}

/// Compact number formatting for the text summary: four decimals, trailing
/// zeros trimmed.
fn fmt(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn fmt_interval(c: &artifacts::CredibleJson) -> String {
    format!("{} ({}, {})", fmt(c.median), fmt(c.lower95), fmt(c.upper95))
}

fn render_summary(report: &FitReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Fit summary: {}", report.label);
    let _ = writeln!(
        out,
        "First observation {} ({} days observed)",
        report.start_date, report.n_observations
    );
    let cfg = &report.config;
    let _ = writeln!(
        out,
        "Seed {}, {} chain(s) x {} samples (burn-in {}, thin {})",
        cfg.seed.map_or_else(|| "unset".to_string(), |s| s.to_string()),
        cfg.chains,
        cfg.samples,
        cfg.burn_in,
        cfg.thin
    );
    let rates: Vec<String> = report.acceptance_rates.iter().map(|&r| fmt(r)).collect();
    let _ = writeln!(out, "Acceptance rate(s): {}", rates.join(", "));
    out.push('\n');
    let _ = writeln!(out, "Posterior medians (95% credible interval):");
    let s = &report.summary;
    let _ = writeln!(out, "  R0                {}", fmt_interval(&s.r0));
    let _ = writeln!(
        out,
        "  generation time   {} days",
        fmt_interval(&s.generation_time)
    );
    let _ = writeln!(out, "  beta              {} /day", fmt_interval(&s.beta));
    let _ = writeln!(out, "  gamma             {} /day", fmt_interval(&s.gamma));
    let _ = writeln!(
        out,
        "  r                 {} interest per % incidence",
        fmt_interval(&s.r)
    );
    let _ = writeln!(out, "  i0                {}", fmt_interval(&s.i0));
    out.push('\n');
    if let Some(diag) = &report.diagnostics {
        let ess: Vec<String> = diag.ess.iter().map(|&e| fmt(e)).collect();
        let rhat: Vec<String> = diag.split_rhat.iter().map(|&r| fmt(r)).collect();
        let _ = writeln!(
            out,
            "ESS (beta, gamma, r, i0): {}",
            ess.join(", ")
        );
        let _ = writeln!(out, "Split R-hat (beta, gamma, r, i0): {}", rhat.join(", "));
    }
    let _ = write!(out, "R2 in-sample {}", fmt(report.r2_in_sample));
    if let Some(r2) = report.r2_out_sample {
        let _ = write!(out, ", out-of-sample {}", fmt(r2));
    }
    out.push('\n');
    match report.crossing_day {
        Some(day) => {
            let _ = writeln!(out, "Median effective R falls below 1 on day {day}");
        }
        None => {
            let _ = writeln!(out, "Median effective R stays above 1 over the window");
        }
    }
    if let Some(peak) = &report.peak {
        let _ = writeln!(
            out,
            "Projected peak (i0 = {}): day {} +/- {} over {} draws, horizon {} days",
            fmt(peak.i0),
            fmt(peak.mean_day),
            fmt(peak.sd_day),
            peak.n_draws,
            peak.horizon
        );
    }
    let _ = writeln!(
        out,
        "Extinction probability at the median R0: {}",
        fmt(report.extinction_probability)
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifacts::{CredibleJson, PeakJson};

    fn credible(m: f64) -> CredibleJson {
        CredibleJson {
            median: m,
            lower95: m * 0.8,
            upper95: m * 1.25,
        }
    }

    fn report() -> FitReport {
        FitReport {
            label: "demo".to_string(),
            start_date: "2014-02-03".to_string(),
            n_observations: 25,
            config: RunConfig {
                seed: Some(42),
                ..RunConfig::default()
            },
            acceptance_rates: vec![0.24, 0.26],
            diagnostics: Some(DiagnosticsJson {
                ess: [210.0, 190.0, 250.0, 175.0],
                split_rhat: [1.01, 1.02, 1.0, 1.03],
            }),
            summary: SummaryJson {
                r0: credible(2.0),
                generation_time: credible(1.0),
                beta: credible(2.0),
                gamma: credible(1.0),
                r: credible(50.0),
                i0: credible(1e-3),
            },
            map: DrawJson {
                beta: 2.0,
                gamma: 1.0,
                r: 50.0,
                i0: 1e-3,
                log_posterior: -80.0,
            },
            r2_in_sample: 0.93,
            r2_out_sample: Some(0.88),
            extinction_probability: 0.5,
            crossing_day: Some(9),
            peak: Some(PeakJson {
                mean_day: 13.3,
                sd_day: 2.1,
                n_draws: 1000,
                i0: 1e-3,
                horizon: 60,
                days: vec![13; 3],
            }),
        }
    }

    #[test]
    fn summary_text_carries_the_headline_numbers() {
        let text = render_summary(&report());
        for needle in [
            "Fit summary: demo",
            "Seed 42",
            "R0                2 (1.6, 2.5)",
            "generation time   1 (0.8, 1.25) days",
            "R2 in-sample 0.93, out-of-sample 0.88",
            "below 1 on day 9",
            "day 13.3 +/- 2.1 over 1000 draws",
            "Extinction probability at the median R0: 0.5",
        ] {
            assert!(text.contains(needle), "missing {needle:?} in:\n{text}");
        }
    }

    #[test]
    fn summary_text_handles_absent_sections() {
        let mut r = report();
        r.diagnostics = None;
        r.r2_out_sample = None;
        r.crossing_day = None;
        r.peak = None;
        let text = render_summary(&r);
        assert!(!text.contains("R-hat"));
        assert!(!text.contains("out-of-sample"));
        assert!(text.contains("stays above 1"));
        assert!(!text.contains("Projected peak"));
    }

    #[test]
    fn simulate_rejects_degenerate_settings() {
        let opts = SimulateOpts {
            posterior: None,
            beta: Some(2.0),
            gamma: Some(1.0),
            r: 1.0,
            i0: 1e-3,
            horizon: 0,
            ensemble: 100,
            seed: None,
            out_dir: PathBuf::from("unused"),
        };
        assert!(matches!(cmd_simulate(&opts).unwrap_err(), Error::Usage(_)));

        let opts = SimulateOpts {
            horizon: 40,
            beta: None,
            ..opts
        };
        assert!(matches!(cmd_simulate(&opts).unwrap_err(), Error::Usage(_)));
    }
}
