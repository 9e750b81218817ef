//! Sources, growth-rate formulas and Monte Carlo experiment runners.
//!
//! Randomness: every stream is drawn from `ChaCha8Rng::seed_from_u64(seed)`
//! with `set_stream(rep)`, and a Bernoulli(`p`) draw is `u < p` for
//! `u = rng.random::<f64>()`. Given `(spec, seed, rep)` the stream is therefore
//! bit-for-bit reproducible, and repetitions are independent streams of the
//! same key.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alternatives::{BettingEProcess, ChangepointMixture, KtPredictor, OrderMixture};
use crate::counts::TransitionCounts;
use crate::eprocess::{EvidenceProcess, EvidenceState};
use crate::error::{Error, Result};
use crate::Symbol;

/// A binary data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    /// i.i.d. `Ber(p)`.
    Bernoulli { p: f64 },
    /// First-order Markov chain with `P(1|0) = p10`, `P(1|1) = p11` and
    /// `P(X_1 = 1) = initial`.
    Markov1 { p10: f64, p11: f64, initial: f64 },
    /// Order-`k` chain; `table[c]` is `P(1 | c)` for the base-2 context `c`.
    /// The first `k` symbols are fair coin flips.
    MarkovK { order: usize, table: Vec<f64> },
    /// Time-varying sticky chain: `X_1 ~ Ber(1/2)`, then
    /// `P(X_t = X_{t-1}) = 1/2 + delta_t`.
    Sticky,
    /// Control for [`SourceSpec::Sticky`]: independent `X_t ~ Ber(1/2 + delta_t)`.
    OneSided,
    /// `Ber(p)` for `t <= n`, `Ber(q)` afterwards.
    Changepoint { p: f64, q: f64, n: u64 },
    /// Deterministic repetition of a pattern.
    Pattern(Vec<Symbol>),
}

fn check_prob(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("probability {p} outside [0, 1]"),
        ))
    }
}

impl SourceSpec {
    pub fn markov(p10: f64, p11: f64) -> Self {
        SourceSpec::Markov1 {
            p10,
            p11,
            initial: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SourceSpec::Bernoulli { p } => check_prob("p", *p),
            SourceSpec::Markov1 { p10, p11, initial } => {
                check_prob("p10", *p10)?;
                check_prob("p11", *p11)?;
                check_prob("initial", *initial)
            }
            SourceSpec::MarkovK { order, table } => {
                TransitionCounts::new(2, *order)?;
                if table.len() != 1 << order {
                    return Err(Error::param(
                        "table",
                        format!(
                            "order {order} needs {} entries, got {}",
                            1usize << order,
                            table.len()
                        ),
                    ));
                }
                table.iter().try_for_each(|&p| check_prob("table", p))
            }
            SourceSpec::Sticky | SourceSpec::OneSided => Ok(()),
            SourceSpec::Changepoint { p, q, n } => {
                check_prob("p", *p)?;
                check_prob("q", *q)?;
                if *n == 0 {
                    return Err(Error::param("n", "changepoint must be >= 1"));
                }
                Ok(())
            }
            SourceSpec::Pattern(pat) => {
                if pat.is_empty() {
                    return Err(Error::param("pattern", "pattern is empty"));
                }
                if let Some(&s) = pat.iter().find(|&&s| s > 1) {
                    return Err(Error::SymbolOutOfRange {
                        symbol: s,
                        alphabet: 2,
                    });
                }
                Ok(())
            }
        }
    }

    /// Asymptotic growth rate of the binary first-order e-process, where the
    /// source has one.
    pub fn rstar(&self) -> Option<f64> {
        match *self {
            SourceSpec::Bernoulli { .. } => Some(0.0),
            SourceSpec::Markov1 { p10, p11, .. } => stationary_limits(p10, p11)
                .ok()
                .and_then(|l| growth_rate_rstar(&l).ok()),
            _ => None,
        }
    }
}

fn parse_f64s(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::param("source", format!("not a number: {x:?}")))
        })
        .collect()
}

impl FromStr for SourceSpec {
    type Err = Error;

    /// Forms: `bernoulli:P`, `markov:P10,P11[,INITIAL]`,
    /// `markovk:K:P_0,..,P_{2^K-1}`, `sticky`, `onesided`,
    /// `changepoint:P,Q,N`, `pattern:BITS`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let bad = |why: &str| Error::param("source", format!("{s:?}: {why}"));
        let spec = match kind.trim().to_ascii_lowercase().as_str() {
            "bernoulli" | "ber" => match parse_f64s(args)?.as_slice() {
                [p] => SourceSpec::Bernoulli { p: *p },
                _ => return Err(bad("expected bernoulli:P")),
            },
            "markov" => match parse_f64s(args)?.as_slice() {
                [p10, p11] => SourceSpec::markov(*p10, *p11),
                [p10, p11, init] => SourceSpec::Markov1 {
                    p10: *p10,
                    p11: *p11,
                    initial: *init,
                },
                _ => return Err(bad("expected markov:P10,P11[,INITIAL]")),
            },
            "markovk" => {
                let (k, table) = args
                    .split_once(':')
                    .ok_or_else(|| bad("expected markovk:K:TABLE"))?;
                let order = k
                    .trim()
                    .parse()
                    .map_err(|_| bad("order is not an integer"))?;
                SourceSpec::MarkovK {
                    order,
                    table: parse_f64s(table)?,
                }
            }
            "sticky" => SourceSpec::Sticky,
            "onesided" | "one-sided" => SourceSpec::OneSided,
            "changepoint" => {
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() != 3 {
                    return Err(bad("expected changepoint:P,Q,N"));
                }
                let v = parse_f64s(&parts[..2].join(","))?;
                let n = parts[2]
                    .trim()
                    .parse()
                    .map_err(|_| bad("N is not an integer"))?;
                SourceSpec::Changepoint {
                    p: v[0],
                    q: v[1],
                    n,
                }
            }
            "pattern" => SourceSpec::Pattern(
                args.trim()
                    .chars()
                    .map(|c| c.to_digit(10).ok_or_else(|| bad("pattern must be digits")))
                    .collect::<Result<_>>()?,
            ),
            _ => return Err(bad("unknown source kind")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Bernoulli { p } => write!(f, "bernoulli:{p}"),
            SourceSpec::Markov1 { p10, p11, initial } => write!(f, "markov:{p10},{p11},{initial}"),
            SourceSpec::MarkovK { order, table } => {
                let t: Vec<String> = table.iter().map(|p| p.to_string()).collect();
                write!(f, "markovk:{order}:{}", t.join(","))
            }
            SourceSpec::Sticky => write!(f, "sticky"),
            SourceSpec::OneSided => write!(f, "onesided"),
            SourceSpec::Changepoint { p, q, n } => write!(f, "changepoint:{p},{q},{n}"),
            SourceSpec::Pattern(p) => {
                let s: String = p
                    .iter()
                    .map(|d| char::from_digit(*d, 10).unwrap_or('?'))
                    .collect();
                write!(f, "pattern:{s}")
            }
        }
    }
}

#[inline]
fn coin(rng: &mut ChaCha8Rng, p: f64) -> Symbol {
    (rng.random::<f64>() < p) as Symbol
}

/// `delta_t = F(t + 1) - F(t)` with `F(t) = min(t / 2, sqrt(t) ln(1 + t))`.
pub fn delta_schedule(t: u64) -> f64 {
    let f = |t: f64| (t / 2.0).min(t.sqrt() * t.ln_1p());
    let t = t as f64;
    (f(t + 1.0) - f(t)).clamp(0.0, 0.5)
}

/// The stream of repetition `rep` of `spec` under `seed`.
pub fn sample_rep(spec: &SourceSpec, t_max: usize, seed: u64, rep: u64) -> Result<Vec<Symbol>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    let mut out: Vec<Symbol> = Vec::with_capacity(t_max);
    match spec {
        SourceSpec::Bernoulli { p } => out.extend((0..t_max).map(|_| coin(&mut rng, *p))),
        SourceSpec::Markov1 { p10, p11, initial } => {
            for t in 0..t_max {
                let p = match t {
                    0 => *initial,
                    _ if out[t - 1] == 1 => *p11,
                    _ => *p10,
                };
                out.push(coin(&mut rng, p));
            }
        }
        SourceSpec::MarkovK { order, table } => {
            let mask = (1usize << order) - 1;
            let mut ctx = 0usize;
            for t in 0..t_max {
                let p = if t < *order { 0.5 } else { table[ctx] };
                let x = coin(&mut rng, p);
                ctx = ((ctx << 1) | x as usize) & mask;
                out.push(x);
            }
        }
        SourceSpec::Sticky => {
            for t in 0..t_max {
                let x = if t == 0 {
                    coin(&mut rng, 0.5)
                } else {
                    let stay = coin(&mut rng, 0.5 + delta_schedule(t as u64 + 1));
                    if stay == 1 {
                        out[t - 1]
                    } else {
                        1 - out[t - 1]
                    }
                };
                out.push(x);
            }
        }
        SourceSpec::OneSided => {
            out.extend((0..t_max).map(|t| coin(&mut rng, 0.5 + delta_schedule(t as u64 + 1))))
        }
        SourceSpec::Changepoint { p, q, n } => out.extend((0..t_max).map(|t| {
            let prob = if (t as u64) < *n { *p } else { *q };
            coin(&mut rng, prob)
        })),
        SourceSpec::Pattern(pat) => out.extend(pat.iter().cycle().take(t_max)),
    }
    Ok(out)
}

/// The first repetition of `spec` under `seed`.
pub fn sample(spec: &SourceSpec, t_max: usize, seed: u64) -> Result<Vec<Symbol>> {
    sample_rep(spec, t_max, seed, 0)
}

/// Limiting pair frequencies: `alpha` for `1 -> 1`, `beta` for `0 -> 0`,
/// `gamma` for `1 -> 0` (equivalently `0 -> 1`) and `p` for ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p: f64,
}

/// Tolerance on `alpha + gamma = p` and `beta + gamma = 1 - p`.
pub const LIMIT_TOL: f64 = 1e-9;

impl LimitParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, p: f64) -> Result<Self> {
        let l = Self {
            alpha,
            beta,
            gamma,
            p,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("p", self.p),
        ] {
            check_prob(name, v)?;
        }
        if (self.alpha + self.gamma - self.p).abs() > LIMIT_TOL
            || (self.beta + self.gamma - (1.0 - self.p)).abs() > LIMIT_TOL
        {
            return Err(Error::param(
                "limits",
                format!("inconsistent frequencies {self:?}"),
            ));
        }
        Ok(())
    }
}

/// Limits of the stationary chain with `P(1|0) = p10`, `P(1|1) = p11`.
pub fn stationary_limits(p10: f64, p11: f64) -> Result<LimitParams> {
    check_prob("p10", p10)?;
    check_prob("p11", p11)?;
    if p10 == 0.0 && p11 == 1.0 {
        return Err(Error::param(
            "transitions",
            "both states absorbing; no unique stationary law",
        ));
    }
    let p = p10 / (p10 + (1.0 - p11));
    LimitParams::new(p * p11, (1.0 - p) * (1.0 - p10), p * (1.0 - p11), p)
}

/// Plug-in frequencies `n_{1|1}/t`, `n_{0|0}/t`, `n_{1|0}/t`, `n_1/t`.
pub fn empirical_limits(stream: &[Symbol]) -> Result<LimitParams> {
    if stream.len() < 2 {
        return Err(Error::param("stream", "need at least two symbols"));
    }
    let c = TransitionCounts::from_stream(2, 1, stream)?;
    let t = c.len() as f64;
    Ok(LimitParams {
        alpha: c.transition(1, 1) as f64 / t,
        beta: c.transition(0, 0) as f64 / t,
        gamma: c.transition(0, 1) as f64 / t,
        p: c.marginal(1) as f64 / t,
    })
}

/// Below this `|alpha (1 - p) - gamma p|` the rate is reported as exactly zero.
pub const RSTAR_ZERO_TOL: f64 = 1e-15;

/// Per-symbol growth rate of `ln R_t`: the entropy gap between the best
/// i.i.d. and the best first-order Markov description of the limits.
pub fn growth_rate_rstar(l: &LimitParams) -> Result<f64> {
    l.validate()?;
    let LimitParams {
        alpha,
        beta,
        gamma,
        p,
    } = *l;
    if (alpha * (1.0 - p) - gamma * p).abs() <= RSTAR_ZERO_TOL {
        return Ok(0.0);
    }
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    let r = term(gamma, 1.0 - p) + term(beta, 1.0 - p) + term(alpha, p) + term(gamma, p)
        - term(p, 1.0)
        - term(1.0 - p, 1.0);
    Ok(r.max(0.0))
}

/// Which evidence process an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvidenceFamily {
    /// Order-`k` KT mixture over the i.i.d. MLE.
    Core { order: usize },
    /// Mixture over orders `1..=max_order`.
    DoubleMixture { max_order: usize },
    /// Mixture over dyadic changepoints.
    ChangepointMixture,
    /// Predictor-driven process with the order-`k` KT predictor.
    Betting { order: usize },
}

impl EvidenceFamily {
    /// Parses a family name, attaching `order` where it applies.
    pub fn parse(name: &str, order: usize) -> Result<Self> {
        match name {
            "core" => Ok(EvidenceFamily::Core { order }),
            "double-mixture" => Ok(EvidenceFamily::DoubleMixture {
                max_order: OrderMixture::DEFAULT_MAX_ORDER,
            }),
            "changepoint-mixture" => Ok(EvidenceFamily::ChangepointMixture),
            "betting" => Ok(EvidenceFamily::Betting { order }),
            _ => Err(Error::param(
                "family",
                format!(
                    "unknown family {name:?} (core, double-mixture, changepoint-mixture, betting)"
                ),
            )),
        }
    }

    pub fn build(&self, alphabet: usize) -> Result<Box<dyn EvidenceProcess + Send>> {
        Ok(match *self {
            EvidenceFamily::Core { order } => Box::new(EvidenceState::new(alphabet, order)?),
            EvidenceFamily::DoubleMixture { max_order } => {
                Box::new(OrderMixture::new(alphabet, max_order)?)
            }
            EvidenceFamily::ChangepointMixture => Box::new(ChangepointMixture::new(alphabet)?),
            EvidenceFamily::Betting { order } => Box::new(BettingEProcess::new(
                KtPredictor::new(alphabet, order)?,
                alphabet,
            )?),
        })
    }
}

impl Default for EvidenceFamily {
    fn default() -> Self {
        EvidenceFamily::Core { order: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: EvidenceFamily,
    pub t_max: usize,
    pub reps: usize,
    pub seed: u64,
    /// Times (1-based) at which `ln R_t` is summarized across reps.
    pub checkpoints: Vec<u64>,
    /// Keep every rep's full `ln R_t` path.
    pub keep_paths: bool,
}

impl ExperimentConfig {
    pub fn new(family: EvidenceFamily, t_max: usize, reps: usize, seed: u64) -> Self {
        Self {
            family,
            t_max,
            reps,
            seed,
            checkpoints: vec![t_max as u64],
            keep_paths: false,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<u64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn keep_paths(mut self, keep: bool) -> Self {
        self.keep_paths = keep;
        self
    }
}

/// Cross-rep summary of `ln R_t` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointSummary {
    pub t: u64,
    pub mean: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
}

/// Per-rep outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RepResult {
    pub rep: u64,
    /// `ln R_t` at each checkpoint.
    pub at_checkpoints: Vec<f64>,
    /// `max_{s<=t_max} ln R_s`.
    pub max_log: f64,
    pub final_log: f64,
    pub path: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec: SourceSpec,
    pub config: ExperimentConfig,
    pub reps: Vec<RepResult>,
    pub summaries: Vec<CheckpointSummary>,
    /// Reference slope where the source has one.
    pub rstar: Option<f64>,
}

impl ExperimentResult {
    /// Fraction of reps whose running maximum reached `ln threshold`.
    pub fn fraction_exceeding(&self, log_threshold: f64) -> f64 {
        let hits = self
            .reps
            .iter()
            .filter(|r| r.max_log >= log_threshold)
            .count();
        hits as f64 / self.reps.len().max(1) as f64
    }

    pub fn summary_at(&self, t: u64) -> Option<&CheckpointSummary> {
        self.summaries.iter().find(|s| s.t == t)
    }
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

fn run_rep(spec: &SourceSpec, cfg: &ExperimentConfig, rep: u64) -> Result<RepResult> {
    let stream = sample_rep(spec, cfg.t_max, cfg.seed, rep)?;
    let mut process = cfg.family.build(2)?;
    let mut at = vec![f64::NAN; cfg.checkpoints.len()];
    let mut max_log = 0.0f64;
    let mut last = 0.0;
    let mut path = cfg.keep_paths.then(|| Vec::with_capacity(cfg.t_max));
    for (i, &x) in stream.iter().enumerate() {
        let t = i as u64 + 1;
        last = process.push(x)?.ln();
        max_log = max_log.max(last);
        for (slot, &c) in at.iter_mut().zip(&cfg.checkpoints) {
            if c == t {
                *slot = last;
            }
        }
        if let Some(p) = path.as_mut() {
            p.push(last);
        }
    }
    Ok(RepResult {
        rep,
        at_checkpoints: at,
        max_log,
        final_log: last,
        path,
    })
}

/// Runs `cfg.reps` independent repetitions of `spec` in parallel.
pub fn run_experiment(spec: &SourceSpec, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    spec.validate()?;
    if let Some(&c) = cfg
        .checkpoints
        .iter()
        .find(|&&c| c == 0 || c > cfg.t_max as u64)
    {
        return Err(Error::param(
            "checkpoints",
            format!("checkpoint {c} outside 1..={}", cfg.t_max),
        ));
    }
    if cfg.reps == 0 {
        return Err(Error::param("reps", "need at least one repetition"));
    }
    let reps = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(spec, cfg, rep))
        .collect::<Result<Vec<_>>>()?;
    let summaries = cfg
        .checkpoints
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let mut v: Vec<f64> = reps.iter().map(|r| r.at_checkpoints[j]).collect();
            v.sort_by(f64::total_cmp);
            CheckpointSummary {
                t,
                mean: v.iter().sum::<f64>() / v.len() as f64,
                q10: quantile_sorted(&v, 0.1),
                median: quantile_sorted(&v, 0.5),
                q90: quantile_sorted(&v, 0.9),
            }
        })
        .collect();
    Ok(ExperimentResult {
        spec: spec.clone(),
        config: cfg.clone(),
        reps,
        summaries,
        rstar: spec.rstar(),
    })
}

/// Least-squares slope of `ys` on `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Reference band `c * sqrt(t ln ln t)` drawn around sticky-source evidence
/// curves; `c` is a free plotting constant.
pub fn fluctuation_band(t: f64, c: f64) -> f64 {
    if t <= std::f64::consts::E {
        return 0.0;
    }
    c * (t * t.ln().ln()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn deterministic_sources() {
        let pat: SourceSpec = "pattern:0011".parse().unwrap();
        assert_eq!(sample(&pat, 8, 1).unwrap(), vec![0, 0, 1, 1, 0, 0, 1, 1]);
        let ones = SourceSpec::Bernoulli { p: 1.0 };
        assert!(sample(&ones, 500, 9).unwrap().iter().all(|&x| x == 1));
        let absorbing = SourceSpec::Markov1 {
            p10: 0.0,
            p11: 0.0,
            initial: 0.0,
        };
        assert!(sample(&absorbing, 500, 9).unwrap().iter().all(|&x| x == 0));
    }

    #[test]
    fn seed_determinism() {
        for spec in [
            "bernoulli:0.3",
            "markov:0.1,0.9",
            "sticky",
            "onesided",
            "changepoint:0.1,0.4,50",
            "markovk:2:0.1,0.9,0.2,0.8",
        ] {
            let spec: SourceSpec = spec.parse().unwrap();
            let a = sample_rep(&spec, 2000, 42, 3).unwrap();
            let b = sample_rep(&spec, 2000, 42, 3).unwrap();
            let c = sample_rep(&spec, 2000, 42, 4).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "bernoulli:0.2".parse::<SourceSpec>().unwrap(),
            SourceSpec::Bernoulli { p: 0.2 }
        );
        assert_eq!(
            "changepoint:0.1,0.4,5000".parse::<SourceSpec>().unwrap(),
            SourceSpec::Changepoint {
                p: 0.1,
                q: 0.4,
                n: 5000
            }
        );
        for bad in [
            "bernoulli:1.2",
            "markov:0.1",
            "pattern:012",
            "pattern:",
            "changepoint:0.1,0.2,0",
            "nope",
            "markovk:2:0.1,0.2",
        ] {
            assert!(bad.parse::<SourceSpec>().is_err(), "{bad}");
        }
        let s: SourceSpec = "markov:0.1,0.9".parse().unwrap();
        assert_eq!(s.to_string().parse::<SourceSpec>().unwrap(), s);
    }

    #[test]
    fn changepoint_switches_law() {
        let spec = SourceSpec::Changepoint {
            p: 0.0,
            q: 1.0,
            n: 10,
        };
        let x = sample(&spec, 30, 1).unwrap();
        assert!(x[..10].iter().all(|&s| s == 0));
        assert!(x[10..].iter().all(|&s| s == 1));
    }

    #[test]
    fn delta_examples() {
        assert!((1..60).all(|t| delta_schedule(t) == 0.5));
        assert!((1..100_000).all(|t| (0.0..=0.5).contains(&delta_schedule(t))));
        // past the crossover, delta_t tracks the derivative of sqrt(t) ln(1 + t),
        // whose leading term is ln t / (2 sqrt t)
        let mut prev_ratio = f64::INFINITY;
        for t in [1e4f64, 1e6, 1e8, 1e10] {
            let d = delta_schedule(t as u64);
            let deriv = (1.0 + t).ln() / (2.0 * t.sqrt()) + t.sqrt() / (1.0 + t);
            assert!((d / deriv - 1.0).abs() < 1e-3, "t={t}: {d} vs {deriv}");
            let ratio = d / (t.ln() / (2.0 * t.sqrt()));
            assert!(ratio > 1.0 && ratio < prev_ratio);
            prev_ratio = ratio;
        }
        assert!(prev_ratio < 1.1);
    }

    #[test]
    fn stationary_examples() {
        let l = stationary_limits(0.1, 0.9).unwrap();
        assert!(close(l.p, 0.5, 1e-15) && close(l.alpha, 0.45, 1e-15));
        assert!(close(l.gamma, 0.05, 1e-15) && close(l.beta, 0.45, 1e-15));
        let c = stationary_limits(0.3, 0.3).unwrap();
        assert!(close(c.alpha * (1.0 - c.p), c.gamma * c.p, 1e-15));
        let alt = stationary_limits(1.0, 0.0).unwrap();
        assert!(close(alt.p, 0.5, 0.0) && alt.alpha == 0.0 && close(alt.gamma, 0.5, 0.0));
        assert!(stationary_limits(0.0, 1.0).is_err());
    }

    #[test]
    fn rstar_examples() {
        let r = |a, b| growth_rate_rstar(&stationary_limits(a, b).unwrap()).unwrap();
        assert!(close(r(0.1, 0.9), 0.36806, 1e-5));
        assert!(close(r(0.4, 0.6), 0.02014, 1e-5));
        assert!(close(r(1.0, 0.0), std::f64::consts::LN_2, 1e-15));
        assert_eq!(r(0.37, 0.37), 0.0);
        assert!(growth_rate_rstar(&LimitParams {
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.5,
            p: 0.5
        })
        .is_err());
    }

    #[test]
    fn rstar_nonnegative_on_grid() {
        for i in 0..50 {
            for j in 0..50 {
                let (a, b) = (i as f64 / 49.0, j as f64 / 49.0);
                let Ok(l) = stationary_limits(a, b) else {
                    continue;
                };
                let r = growth_rate_rstar(&l).unwrap();
                assert!(r >= 0.0);
                if i == j {
                    assert_eq!(r, 0.0, "({a}, {b})");
                } else if (l.alpha * (1.0 - l.p) - l.gamma * l.p).abs() > 1e-9 {
                    assert!(r > 0.0, "({a}, {b})");
                }
            }
        }
    }

    #[test]
    fn empirical_examples() {
        let alt: Vec<Symbol> = (0..1000).map(|i| i % 2).collect();
        let l = empirical_limits(&alt).unwrap();
        assert!(close(l.gamma, 0.5, 1e-3) && l.alpha == 0.0 && close(l.p, 0.5, 1e-3));
        let ones = vec![1; 1000];
        let l = empirical_limits(&ones).unwrap();
        assert!(close(l.alpha, 1.0, 1e-2) && l.p == 1.0);
        assert!(empirical_limits(&[1]).is_err());
    }

    #[test]
    fn empirical_converges_to_stationary() {
        for (a, b) in [(0.2, 0.7), (0.4, 0.6), (0.3, 0.2)] {
            let spec = SourceSpec::markov(a, b);
            let want = stationary_limits(a, b).unwrap();
            for rep in 0..20 {
                let x = sample_rep(&spec, 100_000, 5, rep).unwrap();
                let got = empirical_limits(&x).unwrap();
                for (g, w) in [
                    (got.alpha, want.alpha),
                    (got.beta, want.beta),
                    (got.gamma, want.gamma),
                    (got.p, want.p),
                ] {
                    assert!((g - w).abs() < 0.01, "({a},{b}) rep {rep}: {g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn experiment_runner() {
        let spec = SourceSpec::Bernoulli { p: 0.5 };
        let cfg = ExperimentConfig::new(EvidenceFamily::default(), 1000, 20, 7)
            .with_checkpoints(vec![10, 100, 1000])
            .keep_paths(true);
        let res = run_experiment(&spec, &cfg).unwrap();
        assert_eq!(res.reps.len(), 20);
        let m = res.summary_at(1000).unwrap().median;
        assert!(m < 0.0 && m > -(1000f64.ln()) - 2.0, "median {m}");
        assert_eq!(res.rstar, Some(0.0));
        let again = run_experiment(&spec, &cfg).unwrap();
        assert_eq!(res, again);
        assert!(run_experiment(&spec, &cfg.clone().with_checkpoints(vec![0])).is_err());

        let spec = SourceSpec::markov(0.1, 0.9);
        let res = run_experiment(
            &spec,
            &ExperimentConfig::new(EvidenceFamily::default(), 4000, 8, 1).keep_paths(true),
        )
        .unwrap();
        let path = res.reps[0].path.as_ref().unwrap();
        let xs: Vec<f64> = (2000..4000).map(|t| t as f64).collect();
        let slope = regression_slope(&xs, &path[1999..3999]);
        assert!((slope - res.rstar.unwrap()).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn families_build() {
        for name in ["core", "double-mixture", "changepoint-mixture", "betting"] {
            let fam = EvidenceFamily::parse(name, 1).unwrap();
            let mut p = fam.build(2).unwrap();
            p.run(&[0, 1, 0, 1]).unwrap();
        }
        assert!(EvidenceFamily::parse("bogus", 1).is_err());
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
