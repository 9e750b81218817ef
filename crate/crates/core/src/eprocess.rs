//! The core e-process: a Krichevsky–Trofimov (Jeffreys) mixture over
//! order-`k` Markov chains divided by the i.i.d. maximum likelihood.
//!
//! ```text
//!   ln R_t = sum_{s<=t} ln g_s(X_s)  -  sum_a n_a ln(n_a / t)
//!
//!   g_s(a) = (n_{a|c} + 1/2) / (n_c + d/2)     c = context before s, s > k
//!   g_s(a) = 1/d                               s <= k  (uniform first block)
//! ```
//!
//! The numerator is kept as a running sum of log predictive probabilities, so
//! each update costs O(1) and a query costs O(d). For `k = 1, d = 2` the
//! numerator equals the gamma-function closed form
//!
//! ```text
//!   G(n00+1/2) G(n01+1/2) G(n10+1/2) G(n11+1/2)
//!   -------------------------------------------------
//!   2 G(1/2)^4 G(n00+n10+1) G(n01+n11+1)
//! ```
//!
//! which [`closed_form_log_evidence`] evaluates independently through
//! `ln Gamma`.
//!
//! `R_0 = 1` by convention.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::counts::TransitionCounts;
use crate::error::{check_alpha, Error, Result};
use crate::logspace::x_ln_x_over_y;
use crate::Symbol;

/// Natural logarithm of an e-process value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct LogEvidence(pub f64);

impl LogEvidence {
    pub const ONE: LogEvidence = LogEvidence(0.0);

    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn log10(self) -> f64 {
        self.0 / std::f64::consts::LN_10
    }

    /// The evidence on the linear scale (may overflow to `inf`).
    #[inline]
    pub fn value(self) -> f64 {
        self.0.exp()
    }

    /// True when the evidence reaches `1/alpha`.
    #[inline]
    pub fn rejects_at(self, alpha: f64) -> bool {
        self.0 >= -alpha.ln()
    }
}

/// A streaming evidence process: feed one symbol, read the new log-evidence.
pub trait EvidenceProcess {
    fn push(&mut self, symbol: Symbol) -> Result<LogEvidence>;

    fn log_evidence(&self) -> LogEvidence;

    /// Number of symbols consumed.
    fn len(&self) -> u64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn alphabet(&self) -> usize;

    /// Pushes a whole stream, returning the log-evidence after every symbol.
    fn run(&mut self, stream: &[Symbol]) -> Result<Vec<f64>> {
        stream
            .iter()
            .map(|&a| self.push(a).map(LogEvidence::ln))
            .collect()
    }
}

/// How the first `k` symbols (which have no full context) are priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstBlockPolicy {
    /// `1/d` per symbol. For `k = 1, d = 2` this is the factor 1/2 on `X_1`.
    #[default]
    Uniform,
    /// Order-0 KT predictive over the block seen so far.
    Marginal,
}

/// KT predictive probability `(n_{a|c} + 1/2) / (n_c + d/2)`.
pub fn kt_predictive(counts: &TransitionCounts, context: usize, symbol: Symbol) -> Result<f64> {
    let a = counts.check_symbol(symbol)?;
    if context >= counts.num_contexts() {
        return Err(Error::ContextOutOfRange {
            context,
            contexts: counts.num_contexts(),
        });
    }
    Ok(kt_unchecked(counts, context, a))
}

#[inline]
fn kt_unchecked(counts: &TransitionCounts, context: usize, a: usize) -> f64 {
    let d = counts.alphabet() as f64;
    (counts.transition(context, a) as f64 + 0.5) / (counts.context_total(context) as f64 + 0.5 * d)
}

/// `sum_a n_a ln(n_a / t)`, the maximized i.i.d. log-likelihood.
pub fn log_mle_denominator(counts: &TransitionCounts) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::EmptyStream);
    }
    Ok(log_iid_mle(counts.marginals()))
}

/// Maximized i.i.d. (categorical) log-likelihood of the given marginal counts.
/// Zero for an empty sample.
pub fn log_iid_mle(marginals: &[u64]) -> f64 {
    let t: u64 = marginals.iter().sum();
    if t == 0 {
        return 0.0;
    }
    let t = t as f64;
    marginals.iter().map(|&n| x_ln_x_over_y(n as f64, t)).sum()
}

/// Incremental state of the order-`k`, alphabet-`d` e-process.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceState {
    counts: TransitionCounts,
    log_num: f64,
    first_block: FirstBlockPolicy,
}

impl EvidenceState {
    pub fn new(alphabet: usize, order: usize) -> Result<Self> {
        Self::with_policy(alphabet, order, FirstBlockPolicy::Uniform)
    }

    pub fn with_policy(
        alphabet: usize,
        order: usize,
        first_block: FirstBlockPolicy,
    ) -> Result<Self> {
        Ok(Self {
            counts: TransitionCounts::new(alphabet, order)?,
            log_num: 0.0,
            first_block,
        })
    }

    /// The binary first-order process `R_t`.
    pub fn binary() -> Self {
        Self::new(2, 1).expect("binary order-1 configuration is valid")
    }

    /// Probability the mixture assigns to `symbol` as the next observation.
    pub fn predictive(&self, symbol: Symbol) -> Result<f64> {
        let a = self.counts.check_symbol(symbol)?;
        Ok(self.predictive_unchecked(a))
    }

    fn predictive_unchecked(&self, a: usize) -> f64 {
        let c = &self.counts;
        if c.has_full_context() {
            kt_unchecked(c, c.last_context(), a)
        } else {
            let d = c.alphabet() as f64;
            match self.first_block {
                FirstBlockPolicy::Uniform => 1.0 / d,
                FirstBlockPolicy::Marginal => {
                    (c.marginal(a) as f64 + 0.5) / (c.len() as f64 + 0.5 * d)
                }
            }
        }
    }

    pub fn update(&mut self, symbol: Symbol) -> Result<()> {
        let a = self.counts.check_symbol(symbol)?;
        self.log_num += self.predictive_unchecked(a).ln();
        self.counts.observe(symbol)
    }

    /// Log of the mixture likelihood of the prefix seen so far.
    #[inline]
    pub fn log_numerator(&self) -> f64 {
        self.log_num
    }

    #[inline]
    pub fn counts(&self) -> &TransitionCounts {
        &self.counts
    }

    /// `ln R_t`; zero before the first observation.
    pub fn log_evidence(&self) -> LogEvidence {
        LogEvidence(self.log_num - log_iid_mle(self.counts.marginals()))
    }
}

impl EvidenceProcess for EvidenceState {
    fn push(&mut self, symbol: Symbol) -> Result<LogEvidence> {
        self.update(symbol)?;
        Ok(EvidenceState::log_evidence(self))
    }

    fn log_evidence(&self) -> LogEvidence {
        EvidenceState::log_evidence(self)
    }

    fn len(&self) -> u64 {
        self.counts.len()
    }

    fn alphabet(&self) -> usize {
        self.counts.alphabet()
    }
}

/// Log-evidence after every prefix of `stream`.
pub fn log_evidence_path(alphabet: usize, order: usize, stream: &[Symbol]) -> Result<Vec<f64>> {
    EvidenceState::new(alphabet, order)?.run(stream)
}

/// Gamma-function closed form of `ln R_t` for the binary first-order process.
pub fn closed_form_log_evidence(counts: &TransitionCounts) -> Result<LogEvidence> {
    if counts.alphabet() != 2 || counts.order() != 1 {
        return Err(Error::Unsupported(format!(
            "closed form is only available for d = 2, k = 1 (got d = {}, k = {})",
            counts.alphabet(),
            counts.order()
        )));
    }
    let denom = log_mle_denominator(counts)?;
    let n = |c, a| counts.transition(c, a) as f64;
    let (n00, n10, n01, n11) = (n(0, 0), n(0, 1), n(1, 0), n(1, 1));
    let log_num =
        ln_gamma(n00 + 0.5) + ln_gamma(n01 + 0.5) + ln_gamma(n10 + 0.5) + ln_gamma(n11 + 0.5)
            - 2f64.ln()
            - 2.0 * PI.ln()
            - ln_gamma(n00 + n10 + 1.0)
            - ln_gamma(n01 + n11 + 1.0);
    Ok(LogEvidence(log_num - denom))
}

/// `max_p sum ln P_Markov - max_p sum ln P_iid`: the gap between the maximized
/// order-`k` Markov log-likelihood (transitions out of full contexts only) and
/// the maximized i.i.d. log-likelihood.
pub fn markov_mle_gap(counts: &TransitionCounts) -> f64 {
    let markov: f64 = (0..counts.num_contexts())
        .map(|c| {
            let total = counts.context_total(c) as f64;
            counts
                .context_row(c)
                .iter()
                .map(|&n| x_ln_x_over_y(n as f64, total))
                .sum::<f64>()
        })
        .sum();
    markov - log_iid_mle(counts.marginals())
}

/// Regret constant `C` of the binary first-order process: the maximum of
/// `markov_mle_gap - ln t - ln R_t` over all binary strings of length `1..=16`
/// (attained by the alternating strings). The gap keeps growing slowly along
/// alternating strings, approaching `ln(pi)`, so the bound
/// `ln R_t >= gap - ln t - C` is a finite-length statement.
pub const REGRET_CONSTANT: f64 = 1.1114211139204961;

/// First time `t` (1-based) at which the log-evidence reaches `ln(1/alpha)`.
/// `path[i]` is the log-evidence at time `i + 1`.
pub fn stopping_time(path: &[f64], alpha: f64) -> Result<Option<usize>> {
    check_alpha(alpha)?;
    let threshold = -alpha.ln();
    Ok(path.iter().position(|&l| l >= threshold).map(|i| i + 1))
}
