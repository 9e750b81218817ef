//! Finite-horizon checks of fork-convexity on the binary tree.
//!
//! A law on binary sequences is represented by its likelihood-ratio tree with
//! respect to fair coin flips: `Z(x) = 2^|x| P(x)`, a mean-one martingale
//! (`Z(x) = (Z(x0) + Z(x1)) / 2`). The checks here are:
//!
//! - fork-convex combinations of two such trees are again such trees, and any
//!   process that is a supermartingale under both stays one under the splice;
//! - every law agrees up to depth `s` with a finite fork-convex combination
//!   of i.i.d. Bernoulli laws;
//! - a nonnegative supermartingale under all Bernoulli laws cannot increase.
//!
//! Trees are flat arrays: node `(depth l, path b)` lives at `2^l - 1 + b`, where
//! `b` holds the symbols with the first one most significant.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest supported horizon (`2^21 - 1` nodes).
pub const MAX_HORIZON: usize = 20;
/// Conditionals are clipped to `[CLIP, 1 - CLIP]` in the hull construction.
pub const CLIP: f64 = 1e-9;

#[inline]
fn node(depth: usize, path: usize) -> usize {
    (1 << depth) - 1 + path
}

/// Values on every node of the depth-`T` binary tree.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTreeProcess {
    horizon: usize,
    values: Vec<f64>,
}

impl FiniteTreeProcess {
    /// Builds a tree from `value(depth, path)`.
    pub fn from_fn(horizon: usize, mut value: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_horizon(horizon)?;
        let mut values = Vec::with_capacity((1 << (horizon + 1)) - 1);
        for depth in 0..=horizon {
            for path in 0..1usize << depth {
                values.push(value(depth, path));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::param(
                "value",
                format!("tree values must be finite, got {v}"),
            ));
        }
        Ok(Self { horizon, values })
    }

    pub fn constant(horizon: usize, value: f64) -> Result<Self> {
        Self::from_fn(horizon, |_, _| value)
    }

    /// Tree driven by one-step conditionals `q(depth, path) = P(next = 1 | x)`.
    pub fn from_conditionals(
        horizon: usize,
        mut q: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        let mut values = vec![0.0; (1 << (horizon + 1)) - 1];
        values[0] = 1.0;
        for depth in 0..horizon {
            for path in 0..1usize << depth {
                let p = q(depth, path);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::param("q", format!("conditional {p} outside [0, 1]")));
                }
                let z = values[node(depth, path)];
                values[node(depth + 1, 2 * path)] = 2.0 * z * (1.0 - p);
                values[node(depth + 1, 2 * path + 1)] = 2.0 * z * p;
            }
        }
        Ok(Self { horizon, values })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn value(&self, depth: usize, path: usize) -> f64 {
        self.values[node(depth, path)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Z(x1) / (2 Z(x))`, or `None` where `Z(x) = 0`.
    pub fn conditional(&self, depth: usize, path: usize) -> Option<f64> {
        let z = self.value(depth, path);
        (z > 0.0).then(|| self.value(depth + 1, 2 * path + 1) / (2.0 * z))
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon > MAX_HORIZON {
        return Err(Error::param(
            "horizon",
            format!("at most {MAX_HORIZON}, got {horizon}"),
        ));
    }
    Ok(())
}

/// `Z(x) = 2^|x| p^{n1(x)} (1 - p)^{n0(x)}`.
pub fn bernoulli_density_tree(p: f64, horizon: usize) -> Result<FiniteTreeProcess> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param(
            "p",
            format!("Bernoulli parameter must lie in (0, 1), got {p}"),
        ));
    }
    FiniteTreeProcess::from_conditionals(horizon, |_, _| p)
}

/// Nonnegative, root one, and `Z(x) = (Z(x0) + Z(x1)) / 2` within `tol`.
pub fn is_likelihood_ratio_tree(z: &FiniteTreeProcess, tol: f64) -> bool {
    if (z.value(0, 0) - 1.0).abs() > tol || z.values.iter().any(|&v| v < 0.0) {
        return false;
    }
    (0..z.horizon).all(|depth| {
        (0..1usize << depth).all(|b| {
            let mean = 0.5 * (z.value(depth + 1, 2 * b) + z.value(depth + 1, 2 * b + 1));
            (mean - z.value(depth, b)).abs() <= tol
        })
    })
}

fn same_horizon(a: &FiniteTreeProcess, b: &FiniteTreeProcess) -> Result<()> {
    if a.horizon != b.horizon {
        return Err(Error::param(
            "horizon",
            format!("trees have horizons {} and {}", a.horizon, b.horizon),
        ));
    }
    Ok(())
}

/// Fork-convex combination of `z` and `z2` at depth `s` with weights
/// `h[b]` for the depth-`s` node `b`:
///
/// `Z''(x) = Z(x)` for `|x| <= s`, and otherwise
/// `Z''(x) = h Z(x) + (1 - h) Z(x_{1:s}) Z'(x) / Z'(x_{1:s})`.
pub fn fork_convex_combine(
    z: &FiniteTreeProcess,
    z2: &FiniteTreeProcess,
    s: usize,
    h: &[f64],
) -> Result<FiniteTreeProcess> {
    combine(z, z2, s, h, false)
}

/// The same splice without the `Z(x_{1:s}) / Z'(x_{1:s})` renormalization.
/// This is *not* a valid combination and exists to check that the suites
/// catch it.
pub fn faulty_combine(
    z: &FiniteTreeProcess,
    z2: &FiniteTreeProcess,
    s: usize,
    h: &[f64],
) -> Result<FiniteTreeProcess> {
    combine(z, z2, s, h, true)
}

fn combine(
    z: &FiniteTreeProcess,
    z2: &FiniteTreeProcess,
    s: usize,
    h: &[f64],
    fault: bool,
) -> Result<FiniteTreeProcess> {
    same_horizon(z, z2)?;
    if s > z.horizon {
        return Err(Error::param(
            "s",
            format!("split depth {s} beyond horizon {}", z.horizon),
        ));
    }
    if h.len() != 1 << s {
        return Err(Error::param(
            "h",
            format!("need {} weights, got {}", 1usize << s, h.len()),
        ));
    }
    for (b, &w) in h.iter().enumerate() {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::param("h", format!("weight {w} outside [0, 1]")));
        }
        if z2.value(s, b) == 0.0 && w != 1.0 {
            return Err(Error::ContractViolation(format!(
                "h must be 1 where Z' vanishes (depth {s}, node {b})"
            )));
        }
    }
    FiniteTreeProcess::from_fn(z.horizon, |depth, path| {
        if depth <= s {
            return z.value(depth, path);
        }
        let root = path >> (depth - s);
        let w = h[root];
        let tail = if w == 1.0 {
            0.0
        } else if fault {
            z2.value(depth, path)
        } else {
            z.value(s, root) * z2.value(depth, path) / z2.value(s, root)
        };
        w * z.value(depth, path) + (1.0 - w) * tail
    })
}

/// `(Z(x0) L(x0) + Z(x1) L(x1)) / 2 <= Z(x) L(x) + tol` at every internal node.
pub fn is_supermartingale(l: &FiniteTreeProcess, z: &FiniteTreeProcess, tol: f64) -> bool {
    supermartingale_violation(l, z) <= tol
}

/// Largest excess of the one-step conditional expectation of `Z L` over `Z L`.
pub fn supermartingale_violation(l: &FiniteTreeProcess, z: &FiniteTreeProcess) -> f64 {
    if l.horizon != z.horizon {
        return f64::INFINITY;
    }
    let mut worst = f64::NEG_INFINITY;
    for depth in 0..z.horizon {
        for b in 0..1usize << depth {
            let zl = |d: usize, p: usize| z.value(d, p) * l.value(d, p);
            let mean = 0.5 * (zl(depth + 1, 2 * b) + zl(depth + 1, 2 * b + 1));
            worst = worst.max(mean - zl(depth, b));
        }
    }
    worst
}

/// Clipped one-step conditionals of `target`; uniform where `target` vanishes.
fn clipped_conditional(target: &FiniteTreeProcess, depth: usize, path: usize) -> f64 {
    target
        .conditional(depth, path)
        .unwrap_or(0.5)
        .clamp(CLIP, 1.0 - CLIP)
}

/// `target` with conditionals clipped to `[CLIP, 1 - CLIP]`.
pub fn clipped_target(target: &FiniteTreeProcess) -> Result<FiniteTreeProcess> {
    FiniteTreeProcess::from_conditionals(target.horizon, |d, b| clipped_conditional(target, d, b))
}

/// A finite fork-convex combination of Bernoulli trees agreeing with the
/// (clipped) target on every node of depth `<= s`.
///
/// Step `j` fixes the conditionals at depth `j`: the `2^j` Bernoulli trees
/// `Ber(q(x))`, one per depth-`j` node `x`, are spliced together with
/// indicator weights `h = 1{node = x}`, and the result is grafted onto the
/// current approximation at depth `j` with `h = 0`.
pub fn hull_approximation(target: &FiniteTreeProcess, s: usize) -> Result<FiniteTreeProcess> {
    let t = target.horizon;
    if s > t {
        return Err(Error::param("s", format!("depth {s} beyond horizon {t}")));
    }
    let mut approx = bernoulli_density_tree(clipped_conditional(target, 0, 0), t)?;
    for j in 1..s {
        let width = 1usize << j;
        let mut mixed = bernoulli_density_tree(clipped_conditional(target, j, 0), t)?;
        for x in 1..width {
            let ber = bernoulli_density_tree(clipped_conditional(target, j, x), t)?;
            let indicator: Vec<f64> = (0..width).map(|b| (b == x) as u8 as f64).collect();
            mixed = fork_convex_combine(&ber, &mixed, j, &indicator)?;
        }
        approx = fork_convex_combine(&approx, &mixed, j, &vec![0.0; width])?;
    }
    Ok(approx)
}

/// Largest `|a(x) - b(x)|` over nodes of depth `<= s`.
pub fn max_discrepancy(a: &FiniteTreeProcess, b: &FiniteTreeProcess, s: usize) -> f64 {
    let n = (1usize << (s + 1)) - 1;
    a.values[..n]
        .iter()
        .zip(&b.values[..n])
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `max(1/p_max - 1, 1/(1 - p_min) - 1)`: how far above `L(x)` a child may be
/// when the supermartingale constraints hold only on `p_grid`.
pub fn nsm_slack(p_grid: &[f64]) -> f64 {
    let p_max = p_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let p_min = p_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    (1.0 / p_max - 1.0).max(1.0 / (1.0 - p_min) - 1.0)
}

/// `p L(x1) + (1 - p) L(x0) <= L(x) + tol` for every `p` in the grid and node.
pub fn nsm_constraints_hold(l: &FiniteTreeProcess, p_grid: &[f64], tol: f64) -> bool {
    (0..l.horizon).all(|depth| {
        (0..1usize << depth).all(|b| {
            let (x, x0, x1) = (
                l.value(depth, b),
                l.value(depth + 1, 2 * b),
                l.value(depth + 1, 2 * b + 1),
            );
            p_grid.iter().all(|&p| p * x1 + (1.0 - p) * x0 <= x + tol)
        })
    })
}

/// Outcome of [`nsm_nonincreasing_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsmOutcome {
    /// `L` is not a supermartingale under every grid law; nothing to check.
    ConstraintsViolated,
    /// Constraints hold and `L(xa) <= (L(x) + tol)(1 + slack)` everywhere.
    NonincreasingWithinSlack,
    /// Constraints hold but some child exceeds the bound.
    Counterexample,
}

impl NsmOutcome {
    /// Whether the implication held.
    pub fn holds(self) -> bool {
        self != NsmOutcome::Counterexample
    }
}

/// If `L` is a nonnegative supermartingale under `Ber(p)` for every `p` in
/// the grid, then it is nonincreasing up to the grid slack.
pub fn nsm_nonincreasing_check(l: &FiniteTreeProcess, p_grid: &[f64], tol: f64) -> NsmOutcome {
    if l.values.iter().any(|&v| v < 0.0) || !nsm_constraints_hold(l, p_grid, tol) {
        return NsmOutcome::ConstraintsViolated;
    }
    let factor = 1.0 + nsm_slack(p_grid);
    let ok = (0..l.horizon).all(|depth| {
        (0..1usize << depth).all(|b| {
            let bound = (l.value(depth, b) + tol) * factor * (1.0 + 1e-12);
            l.value(depth + 1, 2 * b) <= bound && l.value(depth + 1, 2 * b + 1) <= bound
        })
    });
    if ok {
        NsmOutcome::NonincreasingWithinSlack
    } else {
        NsmOutcome::Counterexample
    }
}

/// Summary of a randomized suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest observed violation (suite-specific meaning).
    pub max_violation: f64,
    /// Trials in which the property was actually exercised.
    pub exercised: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<10} {}  trials={} exercised={} failures={} max_violation={:.3e}",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.trials,
            self.exercised,
            self.failures,
            self.max_violation
        )
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Random likelihood-ratio tree with conditionals in `[0.01, 0.99]`.
pub fn random_lr_tree(rng: &mut impl Rng, horizon: usize) -> Result<FiniteTreeProcess> {
    FiniteTreeProcess::from_conditionals(horizon, |_, _| rng.random_range(0.01..0.99))
}

/// Random nonnegative process that is a supermartingale under both `z` and
/// `z2`: children are drawn freely, then each pair is scaled down just enough
/// to satisfy both one-step constraints.
pub fn random_joint_supermartingale(
    rng: &mut impl Rng,
    z: &FiniteTreeProcess,
    z2: &FiniteTreeProcess,
) -> Result<FiniteTreeProcess> {
    same_horizon(z, z2)?;
    let t = z.horizon;
    let mut values = vec![0.0; (1 << (t + 1)) - 1];
    values[0] = 1.0;
    for depth in 0..t {
        for b in 0..1usize << depth {
            let l = values[node(depth, b)];
            let mut u0 = rng.random_range(0.0..2.0) * l;
            let mut u1 = rng.random_range(0.0..2.0) * l;
            let mut c: f64 = 1.0;
            for tree in [z, z2] {
                let q = tree.conditional(depth, b).unwrap_or(0.5);
                let e = (1.0 - q) * u0 + q * u1;
                if e > 0.0 {
                    c = c.min(l / e);
                }
            }
            u0 *= c;
            u1 *= c;
            values[node(depth + 1, 2 * b)] = u0;
            values[node(depth + 1, 2 * b + 1)] = u1;
        }
    }
    FiniteTreeProcess::from_fn(t, |d, p| values[node(d, p)])
}

/// Supermartingale closure under fork-convex combination.
///
/// Each trial draws `Z`, `Z'`, a joint supermartingale `L`, a split depth and
/// random weights (with exact zeros and ones mixed in), and checks that the
/// combination is a likelihood-ratio tree under which `L` stays a
/// supermartingale within `tol`. With `inject_fault` the unnormalized splice
/// is used instead and the suite is expected to fail.
pub fn lemma_suite(
    trials: usize,
    horizon: usize,
    seed: u64,
    tol: f64,
    inject_fault: bool,
) -> Result<SuiteReport> {
    check_horizon(horizon)?;
    let results: Vec<Result<(bool, f64)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let z = random_lr_tree(&mut rng, horizon)?;
            let z2 = random_lr_tree(&mut rng, horizon)?;
            let l = random_joint_supermartingale(&mut rng, &z, &z2)?;
            let s = rng.random_range(0..=horizon);
            let h: Vec<f64> = (0..1usize << s)
                .map(|_| match rng.random_range(0..4) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.random::<f64>(),
                })
                .collect();
            let combined = if inject_fault {
                faulty_combine(&z, &z2, s, &h)?
            } else {
                fork_convex_combine(&z, &z2, s, &h)?
            };
            let violation = supermartingale_violation(&l, &combined);
            let ok = violation <= tol && is_likelihood_ratio_tree(&combined, tol);
            Ok((ok, violation))
        })
        .collect();
    let mut report = SuiteReport {
        name: "lemma",
        trials,
        failures: 0,
        max_violation: f64::NEG_INFINITY,
        exercised: trials,
    };
    for r in results {
        let (ok, v) = r?;
        report.failures += (!ok) as usize;
        report.max_violation = report.max_violation.max(v);
    }
    Ok(report)
}

/// Hull approximation agreement for random targets, horizons `1..=max_horizon`
/// and every `s <= T`. `max_violation` is the largest node discrepancy.
pub fn hull_suite(trials: usize, max_horizon: usize, seed: u64, tol: f64) -> Result<SuiteReport> {
    check_horizon(max_horizon)?;
    let results: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let t = rng.random_range(1..=max_horizon.max(1));
            // occasionally extreme conditionals, exercising the clipping
            let target =
                FiniteTreeProcess::from_conditionals(t, |_, _| match rng.random_range(0..8) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.random::<f64>(),
                })?;
            let clipped = clipped_target(&target)?;
            let mut worst: f64 = 0.0;
            for s in 0..=t {
                let approx = hull_approximation(&target, s)?;
                worst = worst.max(max_discrepancy(&approx, &clipped, s));
            }
            Ok(worst)
        })
        .collect();
    let mut report = SuiteReport {
        name: "hull",
        trials,
        failures: 0,
        max_violation: 0.0,
        exercised: trials,
    };
    for r in results {
        let d = r?;
        report.failures += (d >= tol) as usize;
        report.max_violation = report.max_violation.max(d);
    }
    Ok(report)
}

/// Grid of Bernoulli parameters used by the NSM suite.
pub fn default_p_grid() -> Vec<f64> {
    let mut g = vec![1e-6];
    g.extend((1..10).map(|i| i as f64 / 10.0));
    g.push(1.0 - 1e-6);
    g
}

/// Largest relative rise `L(xa) / L(x) - 1` over nodes with `L(x) > 0`.
fn max_increase(l: &FiniteTreeProcess) -> f64 {
    let mut worst = 0.0f64;
    for depth in 0..l.horizon {
        for b in 0..1usize << depth {
            let x = l.value(depth, b);
            if x > 0.0 {
                for a in 0..2 {
                    worst = worst.max(l.value(depth + 1, 2 * b + a) / x - 1.0);
                }
            }
        }
    }
    worst
}

/// Random candidate NSMs at the given horizon. Half the candidates are built
/// to satisfy the grid constraints (nonincreasing children), the rest are
/// unconstrained; every candidate must either violate the constraints or be
/// nonincreasing within the grid slack. `max_violation` is the largest
/// relative rise seen among candidates that satisfy the constraints.
pub fn nsm_suite(trials: usize, horizon: usize, seed: u64, tol: f64) -> Result<SuiteReport> {
    check_horizon(horizon)?;
    let grid = default_p_grid();
    let outcomes: Vec<Result<(NsmOutcome, f64)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let shrink = i % 2 == 0;
            let t = horizon;
            let mut values = vec![0.0; (1 << (t + 1)) - 1];
            values[0] = 1.0;
            for depth in 0..t {
                for b in 0..1usize << depth {
                    let l = values[node(depth, b)];
                    for a in 0..2 {
                        let factor = if shrink {
                            rng.random_range(0.0..=1.0)
                        } else {
                            rng.random_range(0.0..1.3)
                        };
                        values[node(depth + 1, 2 * b + a)] = l * factor;
                    }
                }
            }
            let l = FiniteTreeProcess::from_fn(t, |d, p| values[node(d, p)])?;
            Ok((nsm_nonincreasing_check(&l, &grid, tol), max_increase(&l)))
        })
        .collect();
    let mut report = SuiteReport {
        name: "nsm",
        trials,
        failures: 0,
        max_violation: 0.0,
        exercised: 0,
    };
    for o in outcomes {
        let (outcome, increase) = o?;
        match outcome {
            NsmOutcome::ConstraintsViolated => continue,
            NsmOutcome::NonincreasingWithinSlack => {}
            NsmOutcome::Counterexample => report.failures += 1,
        }
        report.exercised += 1;
        report.max_violation = report.max_violation.max(increase);
    }
    Ok(report)
}
