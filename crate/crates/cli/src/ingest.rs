//! Reading symbol streams from disk.
//!
//! Three layouts are accepted:
//!
//! - one symbol per line (`0\n1\n1`);
//! - compact digit strings (`20120`), possibly spread over several lines;
//! - a numeric CSV column binarized as `value > threshold`.
//!
//! Blank lines are skipped. For alphabets larger than ten every line must hold
//! a single decimal symbol, since digits no longer identify symbols.

use std::fs;
use std::path::{Path, PathBuf};

use exch_core::Symbol;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("line {line}: malformed symbol {content:?}")]
    Malformed { line: usize, content: String },
    #[error("line {line}: symbol {symbol} out of range for alphabet of size {alphabet}")]
    OutOfRange {
        line: usize,
        symbol: u64,
        alphabet: usize,
    },
    #[error("line {line}: non-numeric value {value:?} in column {column:?}")]
    NonNumeric {
        line: usize,
        column: String,
        value: String,
    },
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("line {line}: row has no column {column:?}")]
    ShortRow { line: usize, column: String },
    #[error("input contains no symbols")]
    Empty,
}

/// Where the symbols come from inside a file.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// Symbols or digit strings, one entry per line.
    Symbols { alphabet: usize },
    /// CSV column (name or zero-based index) compared against a threshold.
    Threshold { column: String, threshold: f64 },
}

pub fn ingest(path: &Path, layout: &Layout) -> Result<Vec<Symbol>, IngestError> {
    let stream = match layout {
        Layout::Symbols { alphabet } => {
            let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
                path: path.to_owned(),
                source,
            })?;
            parse_symbols(&text, *alphabet)?
        }
        Layout::Threshold { column, threshold } => {
            let reader = csv::ReaderBuilder::new()
                .flexible(true)
                .trim(csv::Trim::All)
                .from_path(path)
                .map_err(|source| IngestError::Csv {
                    path: path.to_owned(),
                    source,
                })?;
            parse_threshold(reader, path, column, *threshold)?
        }
    };
    if stream.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(stream)
}

pub fn parse_symbols(text: &str, alphabet: usize) -> Result<Vec<Symbol>, IngestError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let entry = raw.trim();
        if entry.is_empty() {
            continue;
        }
        if alphabet > 10 {
            let symbol: u64 = entry.parse().map_err(|_| IngestError::Malformed {
                line,
                content: entry.to_string(),
            })?;
            out.push(check(symbol, alphabet, line)?);
        } else {
            for c in entry.chars() {
                let symbol = c.to_digit(10).ok_or_else(|| IngestError::Malformed {
                    line,
                    content: entry.to_string(),
                })?;
                out.push(check(symbol as u64, alphabet, line)?);
            }
        }
    }
    Ok(out)
}

fn check(symbol: u64, alphabet: usize, line: usize) -> Result<Symbol, IngestError> {
    if symbol < alphabet as u64 {
        Ok(symbol as Symbol)
    } else {
        Err(IngestError::OutOfRange {
            line,
            symbol,
            alphabet,
        })
    }
}

fn parse_threshold<R: std::io::Read>(
    mut reader: csv::Reader<R>,
    path: &Path,
    column: &str,
    threshold: f64,
) -> Result<Vec<Symbol>, IngestError> {
    let csv_err = |source| IngestError::Csv {
        path: path.to_owned(),
        source,
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .or_else(|| column.parse::<usize>().ok().filter(|&i| i < headers.len()))
        .ok_or_else(|| IngestError::MissingColumn(column.to_string()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let cell = record.get(idx).ok_or_else(|| IngestError::ShortRow {
            line,
            column: column.to_string(),
        })?;
        let value: f64 = cell.parse().map_err(|_| IngestError::NonNumeric {
            line,
            column: column.to_string(),
            value: cell.to_string(),
        })?;
        if value.is_nan() {
            return Err(IngestError::NonNumeric {
                line,
                column: column.to_string(),
                value: cell.to_string(),
            });
        }
        out.push((value > threshold) as Symbol);
    }
    Ok(out)
}
