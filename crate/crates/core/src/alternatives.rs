//! E-processes aimed at richer alternatives than a single Markov order.
//!
//! All of them share the same denominator as the core process, the maximized
//! i.i.d. likelihood, and differ only in the non-anticipating numerator:
//!
//! - [`OrderMixture`]: a weighted mixture over Markov orders `k >= 1` with
//!   weights `6 / (pi^2 k^2)`, truncated at `f(t) = floor(log2 t) + 1` orders.
//! - [`BettingEProcess`]: any [`Predictor`] as numerator.
//! - [`ChangepointEProcess`] / [`ChangepointMixture`]: one change in the
//!   i.i.d. law at a dyadic time `n = 2^k`, and their mixture over `k`.
//!
//! Any mixture with total weight at most one of valid e-processes is again a
//! valid e-process, and inherits growth from any of its components.

use std::f64::consts::PI;

use crate::eprocess::{log_iid_mle, EvidenceProcess, EvidenceState, LogEvidence};
use crate::error::{check_alpha, Error, Result};
use crate::logspace::log_sum_exp;
use crate::trajectory::EvidenceTrajectory;
use crate::Symbol;

/// Tolerance on `sum_b g(b) = 1` for predictor outputs.
pub const DISTRIBUTION_TOL: f64 = 1e-9;

/// Weights `w_k = 6 / (pi^2 k^2)` for `k >= 1` and the truncation schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MixtureWeights;

impl MixtureWeights {
    /// `w_k`; zero for `k = 0`.
    pub fn weight(k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            6.0 / (PI * PI * (k as f64).powi(2))
        }
    }

    pub fn log_weight(k: usize) -> f64 {
        (6.0 / (PI * PI)).ln() - 2.0 * (k as f64).ln()
    }

    /// `sum_{k <= n} w_k`.
    pub fn partial_sum(n: usize) -> f64 {
        (1..=n).map(Self::weight).sum()
    }

    /// Number of components active at time `t`: `floor(log2 t) + 1`, and 0
    /// at `t = 0`.
    pub fn truncation(t: u64) -> usize {
        if t == 0 {
            0
        } else {
            (u64::BITS - t.leading_zeros()) as usize
        }
    }
}

/// `ln sum_{k <= f(t)} w_k exp(c_k)` where `components[k - 1] = c_k`.
///
/// Components beyond `f(t)` are ignored; if fewer than `f(t)` are supplied the
/// missing ones contribute nothing, which keeps the total weight below one.
pub fn double_mixture(components: &[f64], t: u64) -> Result<LogEvidence> {
    if components.is_empty() {
        return Err(Error::param("components", "no component evidence supplied"));
    }
    let n = components.len().min(MixtureWeights::truncation(t).max(1));
    let terms: Vec<f64> = components[..n]
        .iter()
        .enumerate()
        .map(|(i, &c)| MixtureWeights::log_weight(i + 1) + c)
        .collect();
    Ok(LogEvidence(log_sum_exp(&terms)))
}

/// Cap on the context-table size of any single order in [`OrderMixture`].
const ORDER_MIXTURE_CELLS: u64 = 1 << 22;

/// Weighted mixture of the order-`k` processes, `k = 1..`, truncated at `f(t)`.
#[derive(Debug, Clone)]
pub struct OrderMixture {
    states: Vec<EvidenceState>,
    scratch: Vec<f64>,
    current: LogEvidence,
}

impl OrderMixture {
    pub const DEFAULT_MAX_ORDER: usize = 16;

    /// Mixes orders `1..=max_order`, dropping orders whose context table
    /// would exceed a few million cells.
    pub fn new(alphabet: usize, max_order: usize) -> Result<Self> {
        if max_order == 0 {
            return Err(Error::param("max_order", "need at least order 1"));
        }
        let mut states = Vec::new();
        let mut cells = alphabet as u64;
        for k in 1..=max_order {
            cells = cells.saturating_mul(alphabet as u64);
            if k > 1 && cells > ORDER_MIXTURE_CELLS {
                break;
            }
            states.push(EvidenceState::new(alphabet, k)?);
        }
        Ok(Self {
            scratch: Vec::with_capacity(states.len()),
            states,
            current: LogEvidence::ONE,
        })
    }

    /// Highest order actually tracked.
    pub fn max_order(&self) -> usize {
        self.states.len()
    }

    /// Per-order log-evidence, order 1 first.
    pub fn component_log_evidence(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.log_evidence().ln()).collect()
    }
}

impl EvidenceProcess for OrderMixture {
    fn push(&mut self, symbol: Symbol) -> Result<LogEvidence> {
        for s in &mut self.states {
            s.update(symbol)?;
        }
        self.scratch.clear();
        self.scratch
            .extend(self.states.iter().map(|s| s.log_evidence().ln()));
        self.current = double_mixture(&self.scratch, self.len())?;
        Ok(self.current)
    }

    fn log_evidence(&self) -> LogEvidence {
        self.current
    }

    fn len(&self) -> u64 {
        self.states[0].counts().len()
    }

    fn alphabet(&self) -> usize {
        self.states[0].counts().alphabet()
    }
}

/// A non-anticipating forecaster of the next symbol.
///
/// `prob(history, b)` is the probability assigned to `b` as the next symbol
/// given the realized `history`. The driver asks for every `b` before the next
/// symbol is revealed and rejects outputs that are not a strictly positive
/// distribution, which is how forecasts that peek at the realized symbol are
/// caught.
pub trait Predictor {
    fn prob(&self, history: &[Symbol], symbol: Symbol) -> f64;

    /// Called after the driver has priced `symbol`.
    fn observe(&mut self, _symbol: Symbol) {}
}

impl<F: Fn(&[Symbol], Symbol) -> f64> Predictor for F {
    fn prob(&self, history: &[Symbol], symbol: Symbol) -> f64 {
        self(history, symbol)
    }
}

/// Order-`k` KT predictor; as a numerator it reproduces [`EvidenceState`].
#[derive(Debug, Clone)]
pub struct KtPredictor {
    state: EvidenceState,
}

impl KtPredictor {
    pub fn new(alphabet: usize, order: usize) -> Result<Self> {
        Ok(Self {
            state: EvidenceState::new(alphabet, order)?,
        })
    }
}

impl Predictor for KtPredictor {
    fn prob(&self, _history: &[Symbol], symbol: Symbol) -> f64 {
        self.state.predictive(symbol).unwrap_or(f64::NAN)
    }

    fn observe(&mut self, symbol: Symbol) {
        // Out-of-range symbols are rejected by the driver before this point.
        let _ = self.state.update(symbol);
    }
}

/// Smoothed maximum-likelihood predictor `(n_a + 1/2) / (m + d/2)` over the
/// `m` symbols it has observed; uniform before any data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmoothedMlePredictor {
    counts: Vec<u64>,
    seen: u64,
}

impl SmoothedMlePredictor {
    pub fn new(alphabet: usize) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::AlphabetTooSmall(alphabet));
        }
        Ok(Self {
            counts: vec![0; alphabet],
            seen: 0,
        })
    }

    pub fn probability(&self, symbol: Symbol) -> f64 {
        let d = self.counts.len() as f64;
        match self.counts.get(symbol as usize) {
            Some(&n) => (n as f64 + 0.5) / (self.seen as f64 + 0.5 * d),
            None => 0.0,
        }
    }

    pub fn update(&mut self, symbol: Symbol) {
        if let Some(n) = self.counts.get_mut(symbol as usize) {
            *n += 1;
            self.seen += 1;
        }
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }
}

impl Predictor for SmoothedMlePredictor {
    fn prob(&self, _history: &[Symbol], symbol: Symbol) -> f64 {
        self.probability(symbol)
    }

    fn observe(&mut self, symbol: Symbol) {
        self.update(symbol);
    }
}

/// Numerator `prod_s g_s(X_s)` from a predictor over the i.i.d. MLE.
#[derive(Debug, Clone)]
pub struct BettingEProcess<P> {
    predictor: P,
    alphabet: usize,
    history: Vec<Symbol>,
    marginals: Vec<u64>,
    log_num: f64,
    probs: Vec<f64>,
}

impl<P: Predictor> BettingEProcess<P> {
    pub fn new(predictor: P, alphabet: usize) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::AlphabetTooSmall(alphabet));
        }
        Ok(Self {
            predictor,
            alphabet,
            history: Vec::new(),
            marginals: vec![0; alphabet],
            log_num: 0.0,
            probs: vec![0.0; alphabet],
        })
    }

    pub fn log_numerator(&self) -> f64 {
        self.log_num
    }

    pub fn predictor(&self) -> &P {
        &self.predictor
    }

    fn check_distribution(&self) -> Result<()> {
        let t = self.history.len() + 1;
        if let Some((b, &p)) = self
            .probs
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p > 0.0 && p.is_finite()))
        {
            return Err(Error::ContractViolation(format!(
                "predictor gave probability {p} to symbol {b} at time {t}"
            )));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOL {
            return Err(Error::ContractViolation(format!(
                "predictor probabilities sum to {total} at time {t}"
            )));
        }
        Ok(())
    }
}

impl<P: Predictor> EvidenceProcess for BettingEProcess<P> {
    fn push(&mut self, symbol: Symbol) -> Result<LogEvidence> {
        let a = symbol as usize;
        if a >= self.alphabet {
            return Err(Error::SymbolOutOfRange {
                symbol,
                alphabet: self.alphabet,
            });
        }
        for b in 0..self.alphabet {
            self.probs[b] = self.predictor.prob(&self.history, b as Symbol);
        }
        self.check_distribution()?;
        self.log_num += self.probs[a].ln();
        self.predictor.observe(symbol);
        self.history.push(symbol);
        self.marginals[a] += 1;
        Ok(self.log_evidence())
    }

    fn log_evidence(&self) -> LogEvidence {
        LogEvidence(self.log_num - log_iid_mle(&self.marginals))
    }

    fn len(&self) -> u64 {
        self.history.len() as u64
    }

    fn alphabet(&self) -> usize {
        self.alphabet
    }
}

/// Runs a predictor-driven e-process over `stream`.
pub fn betting_eprocess<P: Predictor>(
    predictor: P,
    alphabet: usize,
    stream: &[Symbol],
    alpha: f64,
) -> Result<EvidenceTrajectory> {
    check_alpha(alpha)?;
    let mut process = BettingEProcess::new(predictor, alphabet)?;
    EvidenceTrajectory::from_process(&mut process, stream, alpha)
}

/// Changepoint hypothesis at `n = 2^k`: smoothed MLE on `X_1..X_n`, then a
/// fresh smoothed MLE on `X_{n+1}..`.
#[derive(Debug, Clone)]
pub struct ChangepointEProcess {
    change_at: u64,
    pre: SmoothedMlePredictor,
    post: SmoothedMlePredictor,
    marginals: Vec<u64>,
    len: u64,
    log_num: f64,
}

/// Largest admissible hypothesis index; `2^63` is the last power of two in `u64`.
pub const MAX_CHANGEPOINT_INDEX: u32 = 63;

impl ChangepointEProcess {
    pub fn new(alphabet: usize, k: u32) -> Result<Self> {
        if k > MAX_CHANGEPOINT_INDEX {
            return Err(Error::param(
                "k",
                format!("hypothesis index must be <= {MAX_CHANGEPOINT_INDEX}"),
            ));
        }
        Ok(Self {
            change_at: 1u64 << k,
            pre: SmoothedMlePredictor::new(alphabet)?,
            post: SmoothedMlePredictor::new(alphabet)?,
            marginals: vec![0; alphabet],
            len: 0,
            log_num: 0.0,
        })
    }

    pub fn change_at(&self) -> u64 {
        self.change_at
    }

    pub fn log_numerator(&self) -> f64 {
        self.log_num
    }

    fn segment(&mut self) -> &mut SmoothedMlePredictor {
        if self.len < self.change_at {
            &mut self.pre
        } else {
            &mut self.post
        }
    }
}

impl EvidenceProcess for ChangepointEProcess {
    fn push(&mut self, symbol: Symbol) -> Result<LogEvidence> {
        let d = self.marginals.len();
        if symbol as usize >= d {
            return Err(Error::SymbolOutOfRange {
                symbol,
                alphabet: d,
            });
        }
        let seg = self.segment();
        let p = seg.probability(symbol);
        seg.update(symbol);
        self.log_num += p.ln();
        self.marginals[symbol as usize] += 1;
        self.len += 1;
        Ok(self.log_evidence())
    }

    fn log_evidence(&self) -> LogEvidence {
        LogEvidence(self.log_num - log_iid_mle(&self.marginals))
    }

    fn len(&self) -> u64 {
        self.len
    }

    fn alphabet(&self) -> usize {
        self.marginals.len()
    }
}

/// Runs the single changepoint hypothesis `n = 2^k` over `stream`.
pub fn changepoint_eprocess(
    alphabet: usize,
    k: u32,
    stream: &[Symbol],
    alpha: f64,
) -> Result<EvidenceTrajectory> {
    let mut process = ChangepointEProcess::new(alphabet, k)?;
    EvidenceTrajectory::from_process(&mut process, stream, alpha)
}

/// Mixture of changepoint hypotheses `k = 0, 1, ..` with weight `w_{k+1}`.
///
/// At time `t` exactly the hypotheses with `2^k <= t` are active, which is
/// `f(t)` of them. Before its changepoint every hypothesis coincides with the
/// no-change numerator, so hypothesis `k` is spawned at `t = 2^k` from a
/// shared no-change predictor and only its post-change segment is tracked.
#[derive(Debug, Clone)]
pub struct ChangepointMixture {
    base: SmoothedMlePredictor,
    base_log_num: f64,
    /// `(log numerator, post-change predictor)` for `k = 0..`.
    components: Vec<(f64, SmoothedMlePredictor)>,
    marginals: Vec<u64>,
    len: u64,
    scratch: Vec<f64>,
    current: LogEvidence,
}

impl ChangepointMixture {
    pub fn new(alphabet: usize) -> Result<Self> {
        Ok(Self {
            base: SmoothedMlePredictor::new(alphabet)?,
            base_log_num: 0.0,
            components: Vec::new(),
            marginals: vec![0; alphabet],
            len: 0,
            scratch: Vec::new(),
            current: LogEvidence::ONE,
        })
    }

    pub fn active_components(&self) -> usize {
        self.components.len()
    }

    /// Log-evidence of hypothesis `k` (if active).
    pub fn component_log_evidence(&self, k: usize) -> Option<f64> {
        let denom = log_iid_mle(&self.marginals);
        self.components.get(k).map(|(ln, _)| ln - denom)
    }
}

impl EvidenceProcess for ChangepointMixture {
    fn push(&mut self, symbol: Symbol) -> Result<LogEvidence> {
        let d = self.marginals.len();
        if symbol as usize >= d {
            return Err(Error::SymbolOutOfRange {
                symbol,
                alphabet: d,
            });
        }
        for (ln, post) in &mut self.components {
            *ln += post.probability(symbol).ln();
            post.update(symbol);
        }
        self.base_log_num += self.base.probability(symbol).ln();
        self.base.update(symbol);
        self.marginals[symbol as usize] += 1;
        self.len += 1;
        if self.len.is_power_of_two() {
            let fresh = SmoothedMlePredictor::new(d)?;
            self.components.push((self.base_log_num, fresh));
        }
        let denom = log_iid_mle(&self.marginals);
        self.scratch.clear();
        self.scratch
            .extend(self.components.iter().map(|(ln, _)| ln - denom));
        self.current = double_mixture(&self.scratch, self.len)?;
        Ok(self.current)
    }

    fn log_evidence(&self) -> LogEvidence {
        self.current
    }

    fn len(&self) -> u64 {
        self.len
    }

    fn alphabet(&self) -> usize {
        self.marginals.len()
    }
}

/// Runs the changepoint mixture over `stream`.
pub fn changepoint_mixture(
    alphabet: usize,
    stream: &[Symbol],
    alpha: f64,
) -> Result<EvidenceTrajectory> {
    let mut process = ChangepointMixture::new(alphabet)?;
    EvidenceTrajectory::from_process(&mut process, stream, alpha)
}
