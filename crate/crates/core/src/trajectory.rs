//! Per-step record of an evidence run: time, symbol, log-evidence, the
//! anytime-valid p-value, and whether the level-`alpha` test has stopped.

use crate::calibrate::PProcess;
use crate::eprocess::{EvidenceProcess, LogEvidence};
use crate::error::{check_alpha, Result};
use crate::Symbol;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub symbol: Symbol,
    /// Natural log of the evidence.
    pub log_evidence: f64,
    pub p_value: f64,
    /// Latches to true once the evidence has reached `1/alpha`.
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceTrajectory {
    pub alpha: f64,
    pub points: Vec<TrajectoryPoint>,
    p_process: PProcess,
    stopped: bool,
}

impl EvidenceTrajectory {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            points: Vec::new(),
            p_process: PProcess::new(),
            stopped: false,
        })
    }

    pub fn record(&mut self, symbol: Symbol, log_evidence: LogEvidence) -> &TrajectoryPoint {
        let p_value = self.p_process.push_log(log_evidence.ln());
        self.stopped |= log_evidence.rejects_at(self.alpha);
        let stopped = self.stopped;
        self.points.push(TrajectoryPoint {
            t: self.points.len() as u64 + 1,
            symbol,
            log_evidence: log_evidence.ln(),
            p_value,
            stopped,
        });
        self.points.last().expect("just pushed")
    }

    /// Drives `process` over `stream`, recording every step.
    pub fn from_process<P: EvidenceProcess + ?Sized>(
        process: &mut P,
        stream: &[Symbol],
        alpha: f64,
    ) -> Result<Self> {
        let mut traj = Self::new(alpha)?;
        for &a in stream {
            let le = process.push(a)?;
            traj.record(a, le);
        }
        Ok(traj)
    }

    /// First rejection time, if any.
    pub fn stopping_time(&self) -> Option<u64> {
        self.points.iter().find(|p| p.stopped).map(|p| p.t)
    }

    pub fn log_evidence(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.log_evidence).collect()
    }

    pub fn max_log_evidence(&self) -> f64 {
        self.p_process.max_log_evidence()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eprocess::EvidenceState;

    #[test]
    fn stop_flag_latches_and_p_is_monotone() {
        let stream: Vec<Symbol> = (0..100).map(|i| i % 2).collect();
        let mut s = EvidenceState::binary();
        let traj = EvidenceTrajectory::from_process(&mut s, &stream, 0.05).unwrap();
        let tau = traj
            .stopping_time()
            .expect("alternating stream is rejected");
        assert!(tau < 30);
        for w in traj.points.windows(2) {
            assert!(w[1].p_value <= w[0].p_value);
            assert!(!w[0].stopped || w[1].stopped);
        }
        assert!(traj.points[tau as usize - 1].p_value <= 0.05);
    }
}
