//! Command-line pipeline around [`sirfit_core`]: ingest daily interest CSVs,
//! fit the SIR transmission model by MCMC, and emit reproducible artifacts
//! (posterior draws, fit reports, predictive envelopes, plots).
//!
//! The binary exposes four subcommands — `fit`, `simulate`, `validate` and
//! `report` — that communicate only through files, so a long sampling run can
//! be analysed and re-plotted without refitting. Every command is a pure
//! function of its input files, flags and seed: re-running one produces
//! byte-identical artifacts.

#![forbid(unsafe_code)]

use std::io;
use std::path::PathBuf;

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod ingest;
pub mod svg;

pub use config::RunConfig;
pub use ingest::{AlignedWindow, InterestSeries};

/// Failures surfaced by the command-line pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// File could not be read or written.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    /// A CSV input was malformed.
    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    /// A configuration file entry was invalid.
    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// Flags or merged settings do not form a runnable configuration.
    #[error("{0}")]
    Usage(String),
    /// Artifacts expected from an earlier `fit` run are absent.
    #[error("missing artifacts: {}", .paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingArtifacts { paths: Vec<PathBuf> },
    /// A JSON artifact could not be parsed.
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    /// Numerical or sampling failure in the model layer.
    #[error(transparent)]
    Core(#[from] sirfit_core::Error),
}

/// Exit code for input and validation problems.
pub const EXIT_INPUT: u8 = 1;
/// Exit code for numerical or sampler failures.
pub const EXIT_NUMERICAL: u8 = 2;

impl Error {
    /// Process exit code for this failure: 1 for input problems, 2 for
    /// numerical or sampler failures.
    #[must_use]
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::Config { .. }
            | Error::Usage(_)
            | Error::MissingArtifacts { .. }
            | Error::Json { .. } => EXIT_INPUT,
            // Malformed inputs surface from the core layer as parameter or
            // window validation errors; everything else is numerical.
            Error::Core(core) => match core {
                sirfit_core::Error::InvalidParam { .. }
                | sirfit_core::Error::InvalidWindow(_) => EXIT_INPUT,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Wraps an I/O error with the path it concerns.
pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
