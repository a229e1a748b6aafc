//! CSV and JSON writers for outage summaries.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{OutageRecord, OutageSummary};
use crate::error::{Error, Result};

/// Significant digits kept for floats in every output format.
pub const SIGNIFICANT_DIGITS: usize = 12;

pub const CSV_HEADER: [&str; 8] = [
    "scheduler",
    "criterion",
    "snr_db",
    "outage_capacity",
    "mean_capacity",
    "trials",
    "comparisons_mean",
    "scenario",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format {other:?}; expected csv or json"))),
        }
    }
}

impl OutputFormat {
    /// Format implied by a file extension, CSV by default.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest decimal form of `x` after rounding.
pub fn format_float(x: f64) -> String {
    format!("{}", round_significant(x))
}

fn rounded(record: &OutageRecord) -> OutageRecord {
    OutageRecord {
        snr_db: round_significant(record.snr_db),
        outage_capacity: round_significant(record.outage_capacity),
        mean_capacity: round_significant(record.mean_capacity),
        comparisons_mean: round_significant(record.comparisons_mean),
        groups_mean: round_significant(record.groups_mean),
        ..record.clone()
    }
}

pub fn write_csv<W: Write>(summaries: &[OutageSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Config(format!("csv output: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for summary in summaries {
        for r in &summary.records {
            w.write_record([
                r.scheduler.name().to_string(),
                r.criterion.clone(),
                format_float(r.snr_db),
                format_float(r.outage_capacity),
                format_float(r.mean_capacity),
                r.trials.to_string(),
                format_float(r.comparisons_mean),
                r.scenario.clone(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Config(format!("csv output: {e}")))?;
    Ok(())
}

pub fn write_json<W: Write>(summaries: &[OutageSummary], writer: W) -> Result<()> {
    let rounded: Vec<OutageSummary> = summaries
        .iter()
        .map(|s| OutageSummary {
            records: s.records.iter().map(rounded).collect(),
            ..s.clone()
        })
        .collect();
    serde_json::to_writer_pretty(writer, &rounded)
        .map_err(|e| Error::Config(format!("json output: {e}")))
}

pub fn write_to<W: Write>(summaries: &[OutageSummary], format: OutputFormat, writer: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(summaries, writer),
        OutputFormat::Json => write_json(summaries, writer),
    }
}

pub fn write_file(summaries: &[OutageSummary], spec: &OutputSpec) -> Result<()> {
    let io = |source| Error::Io {
        path: spec.path.clone(),
        source,
    };
    let file = std::fs::File::create(&spec.path).map_err(io)?;
    let mut buf = std::io::BufWriter::new(file);
    write_to(summaries, spec.format, &mut buf)?;
    buf.flush().map_err(io)
}
