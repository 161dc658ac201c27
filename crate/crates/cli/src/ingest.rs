//! Ingestion of daily interest CSVs: parsing, validation, gap filling and
//! alignment into the observation vector the fitting pipeline consumes.
//!
//! Input files carry one header line (content ignored) followed by
//! `YYYY-MM-DD,<value>` rows. Values live on the usual 0–100 interest scale;
//! the `"<1"` token some exports use for low-but-nonzero days is read as 0.5,
//! preserving the positivity signal without inventing magnitude. Rows may
//! arrive unsorted and with missing days; [`InterestSeries::fill_gaps`]
//! inserts zero-interest days so the series is spaced exactly one day apart.
//!
//! Alignment follows the convention that the earliest strictly positive value
//! starts the observation window and the model is initialised on the previous
//! day: leading zero days are dropped, trailing zero days are kept (they are
//! informative — the outbreak ended).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use sirfit_core::ObservationWindow;

use crate::{Error, Result};

/// Token some interest exports use for positive values below one.
pub const LOW_INTEREST_TOKEN: &str = "<1";

/// Interest value substituted for [`LOW_INTEREST_TOKEN`].
pub const LOW_INTEREST_VALUE: f64 = 0.5;

/// Largest admissible interest value.
pub const INTEREST_MAX: f64 = 100.0;

/// A daily interest series: strictly increasing dates (one-day spacing once
/// gaps are filled), values in `[0, 100]`, at least one strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestSeries {
    points: Vec<(NaiveDate, f64)>,
    label: String,
}

/// An observation window aligned to calendar time: the core window plus the
/// date of its first (strictly positive) observation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedWindow {
    /// Observations starting at the first positive interest value.
    pub window: ObservationWindow,
    /// Calendar date of the first observation.
    pub start_date: NaiveDate,
    /// Free-text series name, typically the input file stem.
    pub label: String,
}

impl InterestSeries {
    /// Builds a series from points, validating the invariants: non-empty,
    /// dates strictly increasing, values finite in `[0, 100]`, and at least
    /// one value strictly positive.
    pub fn new(label: impl Into<String>, points: Vec<(NaiveDate, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Usage("interest series has no points".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Usage(format!(
                    "dates not strictly increasing: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        let mut any_positive = false;
        for &(date, value) in &points {
            if !value.is_finite() || !(0.0..=INTEREST_MAX).contains(&value) {
                return Err(Error::Usage(format!(
                    "interest {value} on {date} outside [0, {INTEREST_MAX}]"
                )));
            }
            any_positive |= value > 0.0;
        }
        if !any_positive {
            return Err(Error::Usage("interest series is identically zero".into()));
        }
        Ok(Self {
            points,
            label: label.into(),
        })
    }

    /// Series name.
    #[must_use]
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Dated points in ascending order.
    #[must_use]
    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    /// Interest values in date order.
    #[must_use]
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, v)| v).collect()
    }

    /// Date of the first point.
    #[must_use]
    pub fn start_date(&self) -> NaiveDate {
        self.points[0].0
    }

    /// Number of points.
    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: a series holds at least one point.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether consecutive dates are exactly one day apart.
    #[must_use]
    pub fn is_gap_free(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| (w[1].0 - w[0].0).num_days() == 1)
    }

    /// Returns a copy with missing intermediate dates inserted at zero
    /// interest; gap-free input comes back unchanged. Idempotent.
    #[must_use]
    pub fn fill_gaps(&self) -> Self {
        let mut filled = Vec::with_capacity(self.points.len());
        for &(date, value) in &self.points {
            if let Some(&(prev, _)) = filled.last() {
                let mut day: NaiveDate = prev;
                loop {
                    day = day.succ_opt().expect("date overflow while filling gaps");
                    if day >= date {
                        break;
                    }
                    filled.push((day, 0.0));
                }
            }
            filled.push((date, value));
        }
        Self {
            points: filled,
            label: self.label.clone(),
        }
    }

    /// Aligns the series into an observation window: leading zero days are
    /// dropped so observations start at the earliest strictly positive value,
    /// and trailing zeros are retained. The series must be gap-free.
    pub fn to_observation_window(&self) -> Result<AlignedWindow> {
        if !self.is_gap_free() {
            return Err(Error::Usage(format!(
                "series '{}' has missing days; fill gaps before aligning",
                self.label
            )));
        }
        let (offset, window) = ObservationWindow::from_interest(&self.values())?;
        Ok(AlignedWindow {
            window,
            start_date: self.points[offset].0,
            label: self.label.clone(),
        })
    }

    /// Writes the series back out in the input CSV format.
    pub fn serialize<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "date,interest")?;
        for &(date, value) in &self.points {
            writeln!(out, "{date},{value}")?;
        }
        Ok(())
    }
}

/// Parses a `date,value` CSV byte stream into an [`InterestSeries`].
///
/// The first line is a header (content ignored, must exist). Rows may be
/// unsorted; they are re-sorted by date. Duplicate dates, malformed rows and
/// values outside `[0, 100]` are rejected with the offending line number.
/// `origin` only labels error messages.
pub fn parse_csv<R: Read>(mut source: R, label: &str, origin: &Path) -> Result<InterestSeries> {
    let mut text = String::new();
    source.read_to_string(&mut text).map_err(|source| Error::Io {
        path: origin.to_path_buf(),
        source,
    })?;
    if text.trim().is_empty() {
        return Err(csv_err(origin, 1, "empty file, expected a header row"));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    // (date, value, line) triples in file order.
    let mut rows: Vec<(NaiveDate, f64, u64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            csv_err(origin, line, &e.to_string())
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() != 2 {
            return Err(csv_err(
                origin,
                line,
                &format!("expected 2 fields `date,value`, found {}", record.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|_| {
            csv_err(
                origin,
                line,
                &format!("bad date '{}', expected YYYY-MM-DD", &record[0]),
            )
        })?;
        let raw = &record[1];
        let value = if raw == LOW_INTEREST_TOKEN {
            LOW_INTEREST_VALUE
        } else {
            raw.parse::<f64>()
                .map_err(|_| csv_err(origin, line, &format!("bad value '{raw}'")))?
        };
        if !value.is_finite() || !(0.0..=INTEREST_MAX).contains(&value) {
            return Err(csv_err(
                origin,
                line,
                &format!("value {value} outside [0, {INTEREST_MAX}]"),
            ));
        }
        rows.push((date, value, line));
    }
    if rows.is_empty() {
        return Err(csv_err(origin, 1, "no data rows after the header"));
    }

    rows.sort_by_key(|&(date, _, _)| date);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(csv_err(
                origin,
                w[1].2,
                &format!("duplicate date {}", w[1].0),
            ));
        }
    }

    InterestSeries::new(label, rows.into_iter().map(|(d, v, _)| (d, v)).collect())
}

/// Reads and parses an interest CSV file, labelling the series by file stem.
pub fn read_series(path: &Path) -> Result<InterestSeries> {
    let file = std::fs::File::open(path).map_err(crate::io_err(path))?;
    let label = path
        .file_stem()
        .map_or_else(|| "series".to_string(), |s| s.to_string_lossy().into_owned());
    parse_csv(file, &label, path)
}

/// Full ingestion pipeline for one file: parse, fill gaps, align.
pub fn load_window(path: &Path) -> Result<AlignedWindow> {
    read_series(path)?.fill_gaps().to_observation_window()
}

fn csv_err(path: &Path, line: u64, message: &str) -> Error {
    Error::Csv {
        path: PathBuf::from(path),
        line,
        message: message.to_string(),
    }
}
