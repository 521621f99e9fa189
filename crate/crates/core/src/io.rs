//! Annual series ingestion and CSV/JSON writers for every output table.
//!
//! Numbers are written with 9 significant digits, so outputs are byte-stable
//! across platforms.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::calibration::CalibrationResult;
use crate::ensemble::{EnsembleError, SnapshotPanel};
use crate::measures::{GatsbyPoint, MeasurePanel, SummaryRow};

/// Significant digits of every number written.
pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: expected header `{expected}`, found `{found}`", path.display())]
    Header {
        path: PathBuf,
        expected: &'static str,
        found: String,
    },
    #[error("{}:{line}: malformed row: {reason}", path.display())]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{}:{line}: value {value} for {year} outside {allowed}", path.display())]
    OutOfRange {
        path: PathBuf,
        line: u64,
        year: i32,
        value: f64,
        allowed: &'static str,
    },
    #[error("{}:{line}: duplicate year {year}", path.display())]
    DuplicateYear { path: PathBuf, line: u64, year: i32 },
    #[error("{}:{line}: year {year} out of order", path.display())]
    Unordered { path: PathBuf, line: u64, year: i32 },
    #[error("{name}: missing years {missing:?}")]
    Gap { name: String, missing: Vec<i32> },
    #[error("{0}: no data rows")]
    Empty(String),
    #[error("{0} and {1} share no years")]
    EmptyOverlap(String, String),
    #[error("invalid series {name}: {reason}")]
    Invalid { name: String, reason: String },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Unit of an annual series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    /// Dimensionless share in (0, 1).
    Fraction,
    /// Events per person per year, in (0, 1).
    RatePerYear,
}

/// What an input file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// Top-income share per year.
    Share,
    /// Fraction of the working-age population reset (lost or left a job) per year.
    Resetting,
}

impl Schema {
    pub fn units(self) -> Units {
        match self {
            Schema::Share => Units::Fraction,
            Schema::Resetting => Units::RatePerYear,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnualSeries {
    pub name: String,
    pub years: Vec<i32>,
    pub values: Vec<f64>,
    pub units: Units,
}

impl AnnualSeries {
    /// Validates consecutive years and finite values in (0, 1).
    pub fn new(name: impl Into<String>, years: Vec<i32>, values: Vec<f64>, units: Units) -> Result<Self, DataError> {
        let name = name.into();
        let invalid = |reason: String| DataError::Invalid {
            name: name.clone(),
            reason,
        };
        if years.len() != values.len() {
            return Err(invalid(format!("{} years but {} values", years.len(), values.len())));
        }
        if years.is_empty() {
            return Err(DataError::Empty(name));
        }
        if years.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("years not strictly increasing".into()));
        }
        if let Some((y, v)) = years.iter().zip(&values).find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
            return Err(invalid(format!("value {v} for {y} outside (0, 1)")));
        }
        let missing = missing_years(&years);
        if !missing.is_empty() {
            return Err(DataError::Gap { name, missing });
        }
        Ok(Self {
            name,
            years,
            values,
            units,
        })
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn first_year(&self) -> i32 {
        self.years[0]
    }

    pub fn last_year(&self) -> i32 {
        self.years[self.years.len() - 1]
    }

    /// Restriction to `[from, to]`.
    pub fn window(&self, from: i32, to: i32) -> Self {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.years[i] >= from && self.years[i] <= to)
            .collect();
        Self {
            name: self.name.clone(),
            years: keep.iter().map(|&i| self.years[i]).collect(),
            values: keep.iter().map(|&i| self.values[i]).collect(),
            units: self.units,
        }
    }
}

fn missing_years(years: &[i32]) -> Vec<i32> {
    years
        .windows(2)
        .flat_map(|w| (w[0] + 1)..w[1])
        .collect()
}

/// Reads a `year,value` CSV file and validates it against `schema`.
pub fn load_series(path: impl AsRef<Path>, schema: Schema) -> Result<AnnualSeries, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let malformed = |line: u64, reason: String| DataError::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let header = reader.headers().map_err(|e| malformed(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["year", "value"] {
        return Err(DataError::Header {
            path: path.to_path_buf(),
            expected: "year,value",
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut years: Vec<i32> = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(malformed(line, format!("expected 2 fields, found {}", record.len())));
        }
        let year: i32 = record[0]
            .parse()
            .map_err(|_| malformed(line, format!("year `{}` is not an integer", &record[0])))?;
        let value: f64 = record[1]
            .parse()
            .map_err(|_| malformed(line, format!("value `{}` is not a number", &record[1])))?;
        if !(value > 0.0 && value < 1.0) {
            return Err(DataError::OutOfRange {
                path: path.to_path_buf(),
                line,
                year,
                value,
                allowed: "(0, 1)",
            });
        }
        if let Some(&last) = years.last() {
            if years.contains(&year) {
                return Err(DataError::DuplicateYear {
                    path: path.to_path_buf(),
                    line,
                    year,
                });
            }
            if year < last {
                return Err(DataError::Unordered {
                    path: path.to_path_buf(),
                    line,
                    year,
                });
            }
        }
        years.push(year);
        values.push(value);
    }
    let name = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    if years.is_empty() {
        return Err(DataError::Empty(name));
    }
    AnnualSeries::new(name, years, values, schema.units())
}

/// Restricts both series to their common years.
pub fn align(a: &AnnualSeries, b: &AnnualSeries) -> Result<(AnnualSeries, AnnualSeries), DataError> {
    let from = a.first_year().max(b.first_year());
    let to = a.last_year().min(b.last_year());
    if from > to {
        return Err(DataError::EmptyOverlap(a.name.clone(), b.name.clone()));
    }
    Ok((a.window(from, to), b.window(from, to)))
}

/// `%g`-style rendering with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

/// Like [`fmt_sig`], but falls back to the shortest exact representation
/// when 9 digits would not read back as the same number.
pub fn fmt_exact(x: f64) -> String {
    let s = fmt_sig(x);
    if s.parse::<f64>().ok() == Some(x) {
        s
    } else {
        format!("{x:e}")
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| DataError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes `year,value`; values that 9 digits cannot represent exactly are
/// written in full so the series reloads unchanged.
pub fn write_series(path: impl AsRef<Path>, series: &AnnualSeries) -> Result<(), DataError> {
    let rows = series
        .years
        .iter()
        .zip(&series.values)
        .map(|(y, v)| vec![y.to_string(), fmt_exact(*v)]);
    write_text(path.as_ref(), &table("year,value", rows))
}

/// Long-format panel: one `time,slot,income` row per snapshot and slot.
pub fn write_panel(path: impl AsRef<Path>, panel: &SnapshotPanel) -> Result<(), DataError> {
    let mut out = String::from("time,slot,income\n");
    for (t, row) in panel.times().iter().zip(panel.rows()) {
        let time = fmt_sig(*t);
        for (slot, x) in row.iter().enumerate() {
            let _ = writeln!(out, "{time},{slot},{}", fmt_sig(*x));
        }
    }
    write_text(path.as_ref(), &out)
}

/// Reads a panel written by [`write_panel`].
pub fn read_panel(path: impl AsRef<Path>) -> Result<SnapshotPanel, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let file = fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let malformed = |line: u64, reason: String| DataError::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut times: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |i: usize| -> Result<f64, DataError> {
            record
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| malformed(line, format!("field {} is not a number", i + 1)))
        };
        let (time, slot, income) = (parse(0)?, parse(1)?, parse(2)?);
        if times.last() != Some(&time) {
            times.push(time);
            rows.push(Vec::new());
        }
        let row = rows.last_mut().expect("row for current time");
        if slot != row.len() as f64 {
            return Err(malformed(line, format!("slot {slot} out of sequence")));
        }
        row.push(income);
    }
    Ok(SnapshotPanel::new(times, rows)?)
}

/// Columns `time,mean,median`.
pub fn write_summary(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<(), DataError> {
    let rows = rows
        .iter()
        .map(|r| vec![fmt_sig(r.time), fmt_sig(r.mean), fmt_sig(r.median)]);
    write_text(path.as_ref(), &table("time,mean,median", rows))
}

/// Column name of the top-`p` share, e.g. `top1` for 0.01.
pub fn top_column(p: f64) -> String {
    format!("top{}", fmt_sig(p * 100.0))
}

/// Columns `time,gini,top<p>...,theil,spearman,ee`; mobility cells are empty
/// where the snapshot has no partner.
pub fn write_measures(path: impl AsRef<Path>, panel: &MeasurePanel) -> Result<(), DataError> {
    let mut header = vec!["time".to_string(), "gini".to_string()];
    header.extend(panel.fractions.iter().map(|&p| top_column(p)));
    header.extend(["theil", "spearman", "ee"].map(String::from));
    let rows = panel.rows.iter().map(|r| {
        let mut row = vec![fmt_sig(r.time), fmt_sig(r.gini)];
        row.extend(r.top_shares.iter().map(|&v| fmt_sig(v)));
        row.extend([fmt_sig(r.theil), fmt_opt(r.spearman), fmt_opt(r.ee)]);
        row
    });
    write_text(path.as_ref(), &table(&header.join(","), rows))
}

/// Columns `r,ee_median,gini_q1,gini_median,gini_q3,whisker_lo,whisker_hi,n_outliers`.
pub fn write_gatsby(path: impl AsRef<Path>, points: &[GatsbyPoint]) -> Result<(), DataError> {
    let rows = points.iter().map(|p| {
        vec![
            fmt_sig(p.r),
            fmt_sig(p.ee_median),
            fmt_sig(p.gini.q1),
            fmt_sig(p.gini.median),
            fmt_sig(p.gini.q3),
            fmt_sig(p.gini.whisker_lo),
            fmt_sig(p.gini.whisker_hi),
            p.gini.outliers.len().to_string(),
        ]
    });
    write_text(
        path.as_ref(),
        &table(
            "r,ee_median,gini_q1,gini_median,gini_q3,whisker_lo,whisker_hi,n_outliers",
            rows,
        ),
    )
}

/// Per-year estimates with columns
/// `year,mu_hat,mu_lo,mu_hi,sigma_hat,sigma_lo,sigma_hi,r_hat,fitted_share,observed_share,regime`.
pub fn write_calibration(path: impl AsRef<Path>, result: &CalibrationResult) -> Result<(), DataError> {
    let rows = result.estimates.iter().map(|e| {
        vec![
            e.year.to_string(),
            fmt_sig(e.mu_hat),
            fmt_sig(e.mu_lo),
            fmt_sig(e.mu_hi),
            fmt_sig(e.sigma_hat),
            fmt_sig(e.sigma_lo),
            fmt_sig(e.sigma_hi),
            fmt_sig(e.r_hat),
            fmt_sig(e.fitted_share),
            fmt_sig(e.observed_share),
            e.regime.to_string(),
        ]
    });
    write_text(
        path.as_ref(),
        &table(
            "year,mu_hat,mu_lo,mu_hi,sigma_hat,sigma_lo,sigma_hi,r_hat,fitted_share,observed_share,regime",
            rows,
        ),
    )
}

/// Regime threshold bands per year, columns
/// `year,r_hat,r1,r1_lo,r1_hi,r2,r2_lo,r2_hi,failed_replicas`.
pub fn write_thresholds(path: impl AsRef<Path>, result: &CalibrationResult) -> Result<(), DataError> {
    let rows = result.estimates.iter().map(|e| {
        vec![
            e.year.to_string(),
            fmt_sig(e.r_hat),
            fmt_sig(e.mu_hat),
            fmt_sig(e.r1_lo),
            fmt_sig(e.r1_hi),
            fmt_sig(e.r2_hat),
            fmt_sig(e.r2_lo),
            fmt_sig(e.r2_hi),
            e.failed_replicas.to_string(),
        ]
    });
    write_text(
        path.as_ref(),
        &table("year,r_hat,r1,r1_lo,r1_hi,r2,r2_lo,r2_hi,failed_replicas", rows),
    )
}

#[derive(Serialize)]
struct CalibrationSummary<'a> {
    r_squared: f64,
    percentile: f64,
    reps: usize,
    n: usize,
    dt: f64,
    master_seed: u64,
    replica_seeds: Vec<u64>,
    regimes: Vec<(i32, &'a str)>,
}

/// JSON summary: R², percentile, replica count, seeds and per-year regimes.
pub fn write_calibration_summary(path: impl AsRef<Path>, result: &CalibrationResult) -> Result<(), DataError> {
    let summary = CalibrationSummary {
        r_squared: result.r_squared,
        percentile: result.percentile,
        reps: result.reps,
        n: result.n,
        dt: result.dt,
        master_seed: result.master_seed,
        replica_seeds: result.replicas.iter().map(|r| r.seed).collect(),
        regimes: result
            .estimates
            .iter()
            .map(|e| (e.year, e.regime.as_str()))
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    write_text(path.as_ref(), &text)
}
