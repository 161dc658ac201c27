//! `sirfit` binary: subcommand dispatch, flag/config merging and exit codes.
//!
//! Exit codes: 0 success, 1 input or configuration error, 2 numerical or
//! sampler failure. Log diagnostics go to standard error; results and
//! summaries to standard output.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sirfit::commands::{self, ReportOpts, SimulateOpts, ValidateOpts};
use sirfit::config::{parse_step_sizes, RunConfig};
use sirfit::{Error, EXIT_INPUT};

#[derive(Parser)]
#[command(
    name = "sirfit",
    version,
    about = "Fit SIR transmission dynamics to daily online-interest series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the transmission model to an interest CSV by seeded MCMC.
    Fit(FitArgs),
    /// Simulate one trajectory or an ensemble from a stored posterior.
    Simulate(SimulateArgs),
    /// Score a stored posterior against in- and out-of-sample series.
    Validate(ValidateArgs),
    /// Summarise a fit run; optionally render SVG plots.
    Report(ReportArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Flat `key = value` config file; explicit flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interest CSV to fit (`date,value` rows after a header).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Second interest CSV scored out-of-sample.
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Directory receiving posterior.csv, fit_report.json and envelope.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// RNG seed (required; fits are always reproducible).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent chains.
    #[arg(long)]
    chains: Option<usize>,
    /// Discarded adaptation iterations per chain.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Retained iterations per chain.
    #[arg(long)]
    samples: Option<usize>,
    /// Keep every n-th retained iteration.
    #[arg(long)]
    thin: Option<usize>,
    /// Proposal step sizes: one value or four comma-separated values.
    #[arg(long)]
    step_sizes: Option<String>,
    /// Posterior draws used for envelopes and peak timing.
    #[arg(long)]
    ensemble: Option<usize>,
    /// Prior mean of the infectious period (days).
    #[arg(long)]
    prior_mean: Option<f64>,
    /// Prior variance of the infectious period (days squared).
    #[arg(long)]
    prior_var: Option<f64>,
    /// Initial infectious proportion for projected outbreaks.
    #[arg(long)]
    i0: Option<f64>,
    /// Projection horizon in days for peak timing.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Posterior CSV from a fit run (ensemble mode).
    #[arg(long)]
    posterior: Option<PathBuf>,
    /// Transmission rate per day (single-trajectory mode).
    #[arg(long)]
    beta: Option<f64>,
    /// Recovery rate per day (single-trajectory mode).
    #[arg(long)]
    gamma: Option<f64>,
    /// Reporting factor (interest per percentage-point incidence).
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Initial infectious proportion; overrides posterior draws.
    #[arg(long, default_value_t = 1e-3)]
    i0: f64,
    /// Days to simulate.
    #[arg(long, default_value_t = 60)]
    horizon: usize,
    /// Posterior draws in the ensemble.
    #[arg(long, default_value_t = 1_000)]
    ensemble: usize,
    /// RNG seed for ensemble observation noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "sirfit-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Posterior CSV from a fit run.
    #[arg(long)]
    posterior: PathBuf,
    /// In-sample interest CSV.
    #[arg(long)]
    input: PathBuf,
    /// Out-of-sample interest CSV.
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "sirfit-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding the artifacts of a fit run.
    #[arg(long)]
    run_dir: PathBuf,
    /// Render fit.svg, effective_r.svg and posteriors.svg as well.
    #[arg(long)]
    emit_svg: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is a
            // usage problem.
            let code = if err.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> sirfit::Result<()> {
    match command {
        Command::Fit(args) => {
            let config = merge_fit_config(args)?;
            let report = commands::cmd_fit(&config)?;
            let s = &report.summary;
            println!(
                "fitted '{}': R0 {:.3} (95% CI {:.3}-{:.3}), generation time {:.3} days, R2 {:.3}",
                report.label,
                s.r0.median,
                s.r0.lower95,
                s.r0.upper95,
                s.generation_time.median,
                report.r2_in_sample
            );
            println!("artifacts written to {}", config.out_dir.display());
            Ok(())
        }
        Command::Simulate(args) => {
            let opts = SimulateOpts {
                posterior: args.posterior,
                beta: args.beta,
                gamma: args.gamma,
                r: args.r,
                i0: args.i0,
                horizon: args.horizon,
                ensemble: args.ensemble,
                seed: args.seed,
                out_dir: args.out_dir,
            };
            commands::cmd_simulate(&opts)?;
            println!("simulation written to {}", opts.out_dir.display());
            Ok(())
        }
        Command::Validate(args) => {
            let opts = ValidateOpts {
                posterior: args.posterior,
                input: args.input,
                validation: args.validation,
                out_dir: args.out_dir,
            };
            let report = commands::cmd_validate(&opts)?;
            match report.r2_out_sample {
                Some(out) => println!(
                    "R2 in-sample {:.4}, out-of-sample {:.4}",
                    report.r2_in_sample, out
                ),
                None => println!("R2 in-sample {:.4}", report.r2_in_sample),
            }
            Ok(())
        }
        Command::Report(args) => {
            let opts = ReportOpts {
                run_dir: args.run_dir,
                emit_svg: args.emit_svg,
            };
            let text = commands::cmd_report(&opts)?;
            print!("{text}");
            Ok(())
        }
    }
}

/// Defaults, then the config file, then explicit flags.
fn merge_fit_config(args: FitArgs) -> sirfit::Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &args.config {
        config.apply_file(path)?;
    }
    if let Some(v) = args.input {
        config.input = Some(v);
    }
    if let Some(v) = args.validation {
        config.validation = Some(v);
    }
    if let Some(v) = args.out_dir {
        config.out_dir = v;
    }
    if let Some(v) = args.seed {
        config.seed = Some(v);
    }
    if let Some(v) = args.chains {
        config.chains = v;
    }
    if let Some(v) = args.burn_in {
        config.burn_in = v;
    }
    if let Some(v) = args.samples {
        config.samples = v;
    }
    if let Some(v) = args.thin {
        config.thin = v;
    }
    if let Some(v) = &args.step_sizes {
        config.step_sizes = parse_step_sizes(v).map_err(Error::Usage)?;
    }
    if let Some(v) = args.ensemble {
        config.ensemble = v;
    }
    if let Some(v) = args.prior_mean {
        config.prior_mean = v;
    }
    if let Some(v) = args.prior_var {
        config.prior_var = v;
    }
    if let Some(v) = args.i0 {
        config.i0 = v;
    }
    if let Some(v) = args.horizon {
        config.horizon = v;
    }
    Ok(config)
}
