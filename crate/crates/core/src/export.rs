//! CSV and JSON output. Every file is written to a temporary sibling and
//! renamed into place.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{PatrolError, Result};
use crate::game::{PatrollerStrategy, SmugglerStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = PatrolError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(PatrolError::Misuse(format!(
                "unknown format {other:?}, expected csv or json"
            ))),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        })
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| PatrolError::Io(e.error))?;
    Ok(())
}

fn csv_string(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).map_err(csv_error)?;
    for row in rows {
        writer.write_record(&row).map_err(csv_error)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| PatrolError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_error(e: csv::Error) -> PatrolError {
    PatrolError::Io(std::io::Error::other(e))
}

fn matrix_csv(rows: &[Vec<f64>]) -> Result<String> {
    let n = rows.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("state".to_string())
        .chain((1..=n).map(|i| format!("loc_{i}")))
        .collect();
    csv_string(
        &header,
        rows.iter().enumerate().map(|(s, row)| {
            std::iter::once((s + 1).to_string())
                .chain(row.iter().map(|x| x.to_string()))
                .collect()
        }),
    )
}

/// `state,loc_1,...,loc_n` with guard probabilities; states are 1-based.
pub fn patroller_csv(pi: &PatrollerStrategy) -> Result<String> {
    matrix_csv(&pi.rows())
}

/// Same layout as [`patroller_csv`] holding each location's expected
/// quantity: the sending probability for {0, 1} lotteries, the quantity for
/// deterministic ones.
pub fn smuggler_csv(xi: &SmugglerStrategy) -> Result<String> {
    let rows: Vec<Vec<f64>> = (0..xi.n()).map(|s| xi.expected_quantities(s)).collect();
    matrix_csv(&rows)
}

/// `state,value`.
pub fn values_csv(values: &[f64]) -> Result<String> {
    csv_string(
        &["state".to_string(), "value".to_string()],
        values
            .iter()
            .enumerate()
            .map(|(s, v)| vec![(s + 1).to_string(), v.to_string()]),
    )
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn export_patroller(
    pi: &PatrollerStrategy,
    path: impl AsRef<Path>,
    format: ExportFormat,
) -> Result<()> {
    match format {
        ExportFormat::Csv => write_atomic(path, patroller_csv(pi)?.as_bytes()),
        ExportFormat::Json => write_json(pi, path),
    }
}

pub fn export_smuggler(
    xi: &SmugglerStrategy,
    path: impl AsRef<Path>,
    format: ExportFormat,
) -> Result<()> {
    match format {
        ExportFormat::Csv => write_atomic(path, smuggler_csv(xi)?.as_bytes()),
        ExportFormat::Json => write_json(xi, path),
    }
}

/// A labelled numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, values: Vec<f64>) {
        debug_assert_eq!(values.len() + 1, self.header.len());
        self.rows.push((label.into(), values));
    }

    pub fn row(&self, label: &str) -> Option<&[f64]> {
        self.rows
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().skip(1).position(|h| h == name)
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<f64> {
        Some(self.row(row)?[self.column(column)?])
    }

    pub fn to_csv(&self) -> Result<String> {
        csv_string(
            &self.header,
            self.rows.iter().map(|(label, values)| {
                std::iter::once(label.clone())
                    .chain(values.iter().map(|v| v.to_string()))
                    .collect()
            }),
        )
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_csv()?.as_bytes())
    }
}
