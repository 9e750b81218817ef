//! Anytime-valid confidence sequences for the Bernoulli parameter.
//!
//! Replacing the maximized i.i.d. denominator by the likelihood at a fixed `q`
//! gives the point-null process `R^q_t`, and `C_t = { q : R^q_t < 1/alpha }`
//! covers the true parameter at all times with probability `1 - alpha`. Since
//! `R_t = inf_q R^q_t`, the set is empty exactly when `R_t >= 1/alpha`, so
//! stopping at the first empty set is the same test as thresholding `R_t`.

use crate::eprocess::{EvidenceProcess, EvidenceState, LogEvidence};
use crate::error::{check_alpha, Error, Result};
use crate::Symbol;

/// Absolute bisection tolerance on endpoints.
pub const ENDPOINT_TOL: f64 = 1e-9;
/// Search brackets stop this far from `0` and `1`.
pub const BRACKET_EDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfInterval {
    Empty,
    /// Closed interval `[lo, hi]`.
    Closed {
        lo: f64,
        hi: f64,
    },
}

impl ConfInterval {
    pub const FULL: ConfInterval = ConfInterval::Closed { lo: 0.0, hi: 1.0 };

    pub fn is_empty(&self) -> bool {
        matches!(self, ConfInterval::Empty)
    }

    pub fn contains(&self, q: f64) -> bool {
        match *self {
            ConfInterval::Empty => false,
            ConfInterval::Closed { lo, hi } => lo <= q && q <= hi,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            ConfInterval::Empty => None,
            ConfInterval::Closed { lo, hi } => Some((lo, hi)),
        }
    }

    pub fn intersect(&self, other: &ConfInterval) -> ConfInterval {
        match (self.bounds(), other.bounds()) {
            (Some((a, b)), Some((c, d))) => {
                let lo = a.max(c);
                let hi = b.min(d);
                if lo <= hi {
                    ConfInterval::Closed { lo, hi }
                } else {
                    ConfInterval::Empty
                }
            }
            _ => ConfInterval::Empty,
        }
    }
}

fn binary_counts(state: &EvidenceState) -> Result<(f64, f64)> {
    let counts = state.counts();
    if counts.alphabet() != 2 {
        return Err(Error::Unsupported(format!(
            "confidence sequences need a binary alphabet, got {}",
            counts.alphabet()
        )));
    }
    if counts.is_empty() {
        return Err(Error::EmptyStream);
    }
    Ok((counts.marginal(0) as f64, counts.marginal(1) as f64))
}

/// `-n1 ln q - n0 ln(1 - q)`, the negative point-null log-likelihood.
fn neg_log_lik(n0: f64, n1: f64, q: f64) -> f64 {
    let a = if n1 > 0.0 { -n1 * q.ln() } else { 0.0 };
    let b = if n0 > 0.0 { -n0 * (-q).ln_1p() } else { 0.0 };
    a + b
}

/// `ln R^q_t = ln P_mix(X_1..X_t) - (n1 ln q + n0 ln(1 - q))`.
pub fn jeffreys_point_log_evidence(state: &EvidenceState, q: f64) -> Result<LogEvidence> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param(
            "q",
            format!("point null must lie in (0, 1), got {q}"),
        ));
    }
    let (n0, n1) = binary_counts(state)?;
    Ok(LogEvidence(state.log_numerator() + neg_log_lik(n0, n1, q)))
}

/// Bisection for the crossing of `g` (increasing from `inside` to `outside`).
fn bisect(mut inside: f64, mut outside: f64, g: impl Fn(f64) -> f64, level: f64) -> f64 {
    while (outside - inside).abs() > ENDPOINT_TOL {
        let mid = 0.5 * (inside + outside);
        if g(mid) < level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// `C_t` for the binary first-order process in `state`.
///
/// The set is an interval around the MLE `n1 / t` because the point-null
/// log-likelihood is strictly concave in `q`. Endpoints that extend beyond the
/// search brackets are reported as `0` or `1`.
pub fn conf_interval(state: &EvidenceState, alpha: f64) -> Result<ConfInterval> {
    check_alpha(alpha)?;
    let (n0, n1) = binary_counts(state)?;
    let threshold = -alpha.ln();
    if state.log_evidence().ln() >= threshold {
        return Ok(ConfInterval::Empty);
    }
    let level = threshold - state.log_numerator();
    let g = |q: f64| neg_log_lik(n0, n1, q);
    let mle = n1 / (n0 + n1);

    let lo = if n1 == 0.0 || g(BRACKET_EDGE) < level {
        0.0
    } else {
        bisect(mle, BRACKET_EDGE, g, level)
    };
    let hi = if n0 == 0.0 || g(1.0 - BRACKET_EDGE) < level {
        1.0
    } else {
        bisect(mle, 1.0 - BRACKET_EDGE, g, level)
    };
    Ok(ConfInterval::Closed { lo, hi })
}

/// `C_1 ∩ ... ∩ C_t`; once empty it stays empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningIntersection {
    current: ConfInterval,
}

impl Default for RunningIntersection {
    fn default() -> Self {
        Self::new()
    }
}

impl RunningIntersection {
    pub fn new() -> Self {
        Self {
            current: ConfInterval::FULL,
        }
    }

    pub fn push(&mut self, interval: ConfInterval) -> ConfInterval {
        self.current = self.current.intersect(&interval);
        self.current
    }

    pub fn current(&self) -> ConfInterval {
        self.current
    }
}

/// Intersection of a whole sequence of intervals.
pub fn running_intersection(intervals: &[ConfInterval]) -> ConfInterval {
    let mut run = RunningIntersection::new();
    for iv in intervals {
        run.push(*iv);
    }
    run.current()
}

/// Streaming confidence sequence: the per-time interval and the running
/// intersection.
#[derive(Debug, Clone)]
pub struct ConfidenceSequence {
    state: EvidenceState,
    alpha: f64,
    running: RunningIntersection,
}

/// One step of a [`ConfidenceSequence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfStep {
    pub log_evidence: LogEvidence,
    pub interval: ConfInterval,
    pub running: ConfInterval,
}

impl ConfidenceSequence {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            state: EvidenceState::binary(),
            alpha,
            running: RunningIntersection::new(),
        })
    }

    pub fn push(&mut self, symbol: Symbol) -> Result<ConfStep> {
        let log_evidence = self.state.push(symbol)?;
        let interval = conf_interval(&self.state, self.alpha)?;
        let running = self.running.push(interval);
        Ok(ConfStep {
            log_evidence,
            interval,
            running,
        })
    }

    pub fn state(&self) -> &EvidenceState {
        &self.state
    }

    pub fn running(&self) -> ConfInterval {
        self.running.current()
    }
}

/// Per-step intervals for a whole binary stream.
pub fn confidence_sequence(stream: &[Symbol], alpha: f64) -> Result<Vec<ConfStep>> {
    let mut cs = ConfidenceSequence::new(alpha)?;
    stream.iter().map(|&a| cs.push(a)).collect()
}
