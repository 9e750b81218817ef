//! Anytime-valid p-processes, calibrators and adjusters.
//!
//! - `p_t = min(1, 1 / max_{s<=t} R_s)` is an anytime-valid p-process.
//! - The calibrator `f(u) = (1 - u + u ln u) / (u (ln u)^2)` is nonincreasing
//!   with unit integral on `(0, 1]`, so `f(p_t)` is again an e-process.
//! - The adjuster `F(y) = y^2 ln 2 / ((1 + y) ln(1 + y)^2)` is increasing with
//!   `int_1^inf F(y) y^-2 dy = 1`, so `A_t = F(max_{s<=t} R_s)` is an
//!   e-process that never gives back evidence once gained.
//!
//! Everything has a log-space twin because `R_t` routinely exceeds `1e300`.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Streaming p-process over log-evidence values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PProcess {
    max_log: f64,
}

impl Default for PProcess {
    fn default() -> Self {
        Self::new()
    }
}

impl PProcess {
    pub fn new() -> Self {
        Self {
            max_log: f64::NEG_INFINITY,
        }
    }

    /// Feeds `ln R_t` and returns `p_t`.
    pub fn push_log(&mut self, log_evidence: f64) -> f64 {
        if log_evidence > self.max_log {
            self.max_log = log_evidence;
        }
        self.p_value()
    }

    pub fn p_value(&self) -> f64 {
        (-self.max_log.max(0.0)).exp()
    }

    /// `max_{s<=t} ln R_s` (`-inf` before any observation).
    pub fn max_log_evidence(&self) -> f64 {
        self.max_log
    }
}

/// `p_t` for a history of evidence values on the linear scale.
pub fn p_process(evidence: &[f64]) -> Vec<f64> {
    let mut pp = PProcess::new();
    evidence.iter().map(|&e| pp.push_log(e.ln())).collect()
}

/// Below this `|ln u|` the calibrator is evaluated by its Taylor series.
const SERIES_CUTOFF: f64 = 1e-4;

/// The calibrator `f(u)`; `f(1) = 1/2`.
pub fn calibrator(u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::param(
            "u",
            format!("p-value must lie in (0, 1], got {u}"),
        ));
    }
    Ok(log_calibrator(u.ln())?.exp())
}

/// `ln f(u)` given `ln u <= 0`.
///
/// With `v = -ln u` the calibrator is `(e^v - 1 - v) / v^2`.
pub fn log_calibrator(log_u: f64) -> Result<f64> {
    if !(log_u <= 0.0) {
        return Err(Error::param(
            "log_u",
            format!("log p-value must be <= 0, got {log_u}"),
        ));
    }
    let v = -log_u;
    let value = if v < SERIES_CUTOFF {
        (0.5 + v / 6.0 + v * v / 24.0 + v * v * v / 120.0).ln()
    } else if v < 40.0 {
        ((v.exp_m1() - v) / (v * v)).ln()
    } else {
        v - 2.0 * v.ln() + (-(1.0 + v) * (-v).exp()).ln_1p()
    };
    Ok(value)
}

/// The adjuster `F(y)` for `y >= 1`; `F(1) = 1 / (2 ln 2)`.
pub fn adjuster(y: f64) -> Result<f64> {
    if !(y >= 1.0) {
        return Err(Error::param("y", format!("adjuster needs y >= 1, got {y}")));
    }
    Ok(log_adjuster(y.ln())?.exp())
}

/// `ln F(y)` given `ln y >= 0`.
pub fn log_adjuster(log_y: f64) -> Result<f64> {
    if !(log_y >= 0.0) {
        return Err(Error::param(
            "log_y",
            format!("adjuster needs ln y >= 0, got {log_y}"),
        ));
    }
    if log_y == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    // ln(1 + y) without forming y
    let log1p_y = log_y + (-log_y).exp().ln_1p();
    Ok(LN_2.ln() + 2.0 * log_y - log1p_y - 2.0 * log1p_y.ln())
}

/// `A_t = F(max(1, max_{s<=t} R_s))` for evidence on the linear scale.
pub fn adjusted_eprocess(evidence: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = evidence.iter().map(|e| e.ln()).collect();
    adjusted_log_eprocess(&logs)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// `ln A_t` for a history of log-evidence values. Prefixes whose running
/// maximum is below one are mapped to `F(1)`.
pub fn adjusted_log_eprocess(log_evidence: &[f64]) -> Vec<f64> {
    let mut running = 0.0f64;
    log_evidence
        .iter()
        .map(|&l| {
            running = running.max(l);
            log_adjuster(running).expect("running maximum is >= 0")
        })
        .collect()
}

/// `ln f(p_t)` for a history of log-evidence values.
pub fn calibrated_log_eprocess(log_evidence: &[f64]) -> Vec<f64> {
    let mut pp = PProcess::new();
    log_evidence
        .iter()
        .map(|&l| {
            pp.push_log(l);
            let log_p = -pp.max_log_evidence().max(0.0);
            log_calibrator(log_p).expect("log p-value is <= 0")
        })
        .collect()
}
