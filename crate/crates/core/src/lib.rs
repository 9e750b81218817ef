//! Safe e-processes for sequentially testing exchangeability.
//!
//! The null hypothesis is that a finite-alphabet stream `X_1, X_2, ...` is
//! exchangeable (by de Finetti, a mixture of i.i.d. laws). Nonnegative
//! supermartingales are powerless against it, so the evidence processes here
//! are ratios of a non-anticipating likelihood (Krichevsky–Trofimov mixtures
//! over Markov alternatives, or any other predictor) to the *maximum*
//! likelihood under the i.i.d. null:
//!
//! ```text
//!   R_t = P_mix(X_1..X_t) / max_p  prod_s p(X_s)
//! ```
//!
//! `R_t` has expectation at most one at every stopping time under every null
//! law, so `inf { t : R_t >= 1/alpha }` is a level-alpha sequential test.
//!
//! Modules:
//!
//! - [`counts`]: sufficient statistics (per-context transition counts).
//! - [`eprocess`]: the core order-`k`, alphabet-`d` e-process and its
//!   closed-form gamma oracle for `k = 1, d = 2`.
//! - [`alternatives`]: double mixtures over Markov orders, betting
//!   e-processes driven by arbitrary predictors, changepoint mixtures.
//! - [`calibrate`]: p-processes, calibrators and adjusters.
//! - [`confseq`]: confidence sequences for the Bernoulli parameter.
//! - [`theory`]: finite-horizon checks of fork-convex combinations.
//! - [`sim`]: sources, growth-rate formulas and experiment runners.

#![forbid(unsafe_code)]

pub mod alternatives;
pub mod calibrate;
pub mod confseq;
pub mod counts;
pub mod eprocess;
mod error;
pub mod logspace;
pub mod sim;
pub mod theory;
pub mod trajectory;

pub use counts::TransitionCounts;
pub use eprocess::{EvidenceProcess, EvidenceState, LogEvidence};
pub use error::{Error, Result};
pub use trajectory::{EvidenceTrajectory, TrajectoryPoint};

/// A symbol of the observed alphabet `{0, .., d-1}`.
pub type Symbol = u32;
