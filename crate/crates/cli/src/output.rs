//! CSV and SVG emission. Numbers use fixed formats so that identical runs
//! produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::plot::Chart;
use crate::{CliError, CliResult};

/// `ln` to `log10`.
pub fn log10(ln_value: f64) -> f64 {
    ln_value / std::f64::consts::LN_10
}

pub fn fixed(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6}")
    }
}

pub fn sci(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6e}")
    }
}

pub fn opt_fixed(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

/// Header plus rows, rendered in one go.
#[derive(Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        // writing into a Vec cannot fail
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn emit(&self, path: Option<&Path>) -> CliResult<()> {
        write_bytes(path, &self.render())
    }
}

pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|source| CliError::Output {
            path: p.to_owned(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Output {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

pub fn emit_plot(path: Option<&Path>, chart: &Chart) -> CliResult<()> {
    match path {
        Some(p) => write_bytes(Some(p), chart.to_svg().as_bytes()),
        None => Ok(()),
    }
}

/// Indices `0..n` kept when a long run is thinned to roughly `target` rows.
/// The first hundred steps and the last step are always kept.
pub fn thin(n: usize, target: usize) -> Vec<usize> {
    let step = n.div_ceil(target.max(1)).max(1);
    (0..n)
        .filter(|&i| i < 100 || (i + 1) % step == 0 || i + 1 == n)
        .collect()
}
