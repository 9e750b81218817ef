//! Sufficient statistics of a finite-alphabet stream.
//!
//! For alphabet size `d` and context order `k` we keep the marginal symbol
//! counts `n_a` and the transition counts `n_{a|c}`, where the context `c` is
//! the length-`k` block preceding each symbol. Contexts are encoded as base-`d`
//! integers (oldest symbol most significant), so the context table is a dense
//! `d^k x d` array.
//!
//! The first `k` symbols have no full context and contribute to the marginal
//! counts only.

use crate::error::{Error, Result};
use crate::Symbol;

/// Largest admissible number of cells `d^(k+1)` in the context table.
pub const MAX_TABLE_CELLS: u64 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    alphabet: usize,
    order: usize,
    len: u64,
    marginal: Vec<u64>,
    /// `ctx[c * d + a] = n_{a|c}`.
    ctx: Vec<u64>,
    /// `ctx_total[c] = sum_a n_{a|c}`.
    ctx_total: Vec<u64>,
    /// Base-`d` code of the last `min(t, k)` symbols.
    last_ctx: usize,
    num_contexts: usize,
}

impl TransitionCounts {
    pub fn new(alphabet: usize, order: usize) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::AlphabetTooSmall(alphabet));
        }
        let too_large = || Error::OrderTooLarge { alphabet, order };
        let mut cells: u64 = alphabet as u64;
        for _ in 0..order {
            cells = cells.checked_mul(alphabet as u64).ok_or_else(too_large)?;
            if cells > MAX_TABLE_CELLS {
                return Err(too_large());
            }
        }
        if cells > MAX_TABLE_CELLS {
            return Err(too_large());
        }
        let num_contexts = (cells / alphabet as u64) as usize;
        Ok(Self {
            alphabet,
            order,
            len: 0,
            marginal: vec![0; alphabet],
            ctx: vec![0; cells as usize],
            ctx_total: vec![0; num_contexts],
            last_ctx: 0,
            num_contexts,
        })
    }

    /// Builds counts by replaying a whole stream.
    pub fn from_stream(alphabet: usize, order: usize, stream: &[Symbol]) -> Result<Self> {
        let mut counts = Self::new(alphabet, order)?;
        for &a in stream {
            counts.observe(a)?;
        }
        Ok(counts)
    }

    pub fn check_symbol(&self, a: Symbol) -> Result<usize> {
        let idx = a as usize;
        if idx < self.alphabet {
            Ok(idx)
        } else {
            Err(Error::SymbolOutOfRange {
                symbol: a,
                alphabet: self.alphabet,
            })
        }
    }

    pub fn observe(&mut self, a: Symbol) -> Result<()> {
        let a = self.check_symbol(a)?;
        if self.has_full_context() {
            self.ctx[self.last_ctx * self.alphabet + a] += 1;
            self.ctx_total[self.last_ctx] += 1;
        }
        self.marginal[a] += 1;
        self.len += 1;
        self.last_ctx = (self.last_ctx * self.alphabet + a) % self.num_contexts;
        Ok(())
    }

    /// True once at least `k` symbols have been seen, i.e. the next symbol
    /// will be counted as a transition out of [`Self::last_context`].
    #[inline]
    pub fn has_full_context(&self) -> bool {
        self.len >= self.order as u64
    }

    #[inline]
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of symbols observed so far (`t`).
    #[inline]
    pub fn len(&self) -> u64 {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    #[inline]
    pub fn last_context(&self) -> usize {
        self.last_ctx
    }

    /// `n_a`.
    #[inline]
    pub fn marginal(&self, a: usize) -> u64 {
        self.marginal[a]
    }

    pub fn marginals(&self) -> &[u64] {
        &self.marginal
    }

    /// `n_{a|c}`.
    #[inline]
    pub fn transition(&self, c: usize, a: usize) -> u64 {
        self.ctx[c * self.alphabet + a]
    }

    /// `sum_a n_{a|c}`.
    #[inline]
    pub fn context_total(&self, c: usize) -> u64 {
        self.ctx_total[c]
    }

    /// Row of counts `n_{.|c}`.
    pub fn context_row(&self, c: usize) -> &[u64] {
        &self.ctx[c * self.alphabet..(c + 1) * self.alphabet]
    }

    /// Base-`d` code of a context given oldest symbol first.
    pub fn encode_context(&self, symbols: &[Symbol]) -> Result<usize> {
        if symbols.len() != self.order {
            return Err(Error::param(
                "context",
                format!("expected {} symbols, got {}", self.order, symbols.len()),
            ));
        }
        symbols.iter().try_fold(0usize, |acc, &s| {
            Ok(acc * self.alphabet + self.check_symbol(s)?)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Recount from scratch with explicit windows.
    fn brute_counts(d: usize, k: usize, stream: &[Symbol]) -> (Vec<u64>, Vec<u64>) {
        let contexts = d.pow(k as u32);
        let mut marg = vec![0u64; d];
        let mut ctx = vec![0u64; contexts * d];
        for (i, &a) in stream.iter().enumerate() {
            marg[a as usize] += 1;
            if i >= k {
                let c = stream[i - k..i]
                    .iter()
                    .fold(0usize, |acc, &s| acc * d + s as usize);
                ctx[c * d + a as usize] += 1;
            }
        }
        (marg, ctx)
    }

    #[test]
    fn fresh_counts_are_zero() {
        let c = TransitionCounts::new(2, 1).unwrap();
        assert_eq!(c.len(), 0);
        assert_eq!(c.marginals(), &[0, 0]);
        assert_eq!(c.num_contexts(), 2);

        let c = TransitionCounts::new(3, 2).unwrap();
        assert_eq!(c.num_contexts(), 9);
        assert!(c.ctx.iter().all(|&n| n == 0));
    }

    #[test]
    fn rejects_bad_configuration() {
        assert_eq!(TransitionCounts::new(1, 1), Err(Error::AlphabetTooSmall(1)));
        assert!(matches!(
            TransitionCounts::new(2, 31),
            Err(Error::OrderTooLarge { .. })
        ));
        assert!(matches!(
            TransitionCounts::new(1000, 5),
            Err(Error::OrderTooLarge { .. })
        ));
    }

    #[test]
    fn two_symbol_stream() {
        let c = TransitionCounts::from_stream(2, 1, &[0, 1]).unwrap();
        assert_eq!((c.marginal(0), c.marginal(1)), (1, 1));
        assert_eq!(c.transition(0, 1), 1);
        assert_eq!(c.transition(0, 0), 0);
        assert_eq!(c.transition(1, 0), 0);
        assert_eq!(c.transition(1, 1), 0);
    }

    #[test]
    fn alternating_stream() {
        let c = TransitionCounts::from_stream(2, 1, &[0, 1, 0, 1]).unwrap();
        assert_eq!(c.transition(0, 1), 2);
        assert_eq!(c.transition(1, 0), 1);
        assert_eq!(c.transition(0, 0), 0);
        assert_eq!(c.transition(1, 1), 0);
    }

    #[test]
    fn single_symbol_has_no_transitions() {
        let c = TransitionCounts::from_stream(2, 1, &[1]).unwrap();
        assert_eq!(c.marginal(1), 1);
        assert_eq!(c.context_total(0) + c.context_total(1), 0);
        assert_eq!(c.last_context(), 1);
    }

    #[test]
    fn symbol_out_of_range() {
        let mut c = TransitionCounts::new(3, 1).unwrap();
        assert_eq!(
            c.observe(3),
            Err(Error::SymbolOutOfRange {
                symbol: 3,
                alphabet: 3
            })
        );
        assert_eq!(c.len(), 0);
    }

    #[test]
    fn encode_context_is_base_d() {
        let c = TransitionCounts::new(3, 2).unwrap();
        assert_eq!(c.encode_context(&[2, 1]).unwrap(), 7);
        assert!(c.encode_context(&[1]).is_err());
    }

    proptest! {
        #[test]
        fn incremental_matches_replay(
            d in 2usize..5,
            k in 0usize..4,
            raw in proptest::collection::vec(0u32..100, 0..300),
        ) {
            let stream: Vec<Symbol> = raw.iter().map(|&s| s % d as u32).collect();
            let mut c = TransitionCounts::new(d, k).unwrap();
            for (i, &a) in stream.iter().enumerate() {
                c.observe(a).unwrap();
                let t = (i + 1) as u64;
                prop_assert_eq!(c.marginals().iter().sum::<u64>(), t);
                prop_assert_eq!(c.ctx.iter().sum::<u64>(), t.saturating_sub(k as u64));
                prop_assert_eq!(c.ctx_total.iter().sum::<u64>(), t.saturating_sub(k as u64));
                // last context equals the encoded suffix
                let lo = (i + 1).saturating_sub(k);
                let suffix = stream[lo..=i]
                    .iter()
                    .fold(0usize, |acc, &s| acc * d + s as usize);
                prop_assert_eq!(c.last_context(), suffix % c.num_contexts());
                if d == 2 && k == 1 {
                    let diff = c.transition(0, 1) as i64 - c.transition(1, 0) as i64;
                    prop_assert!(diff.abs() <= 1);
                }
            }
            let (marg, ctx) = brute_counts(d, k, &stream);
            prop_assert_eq!(c.marginals(), &marg[..]);
            prop_assert_eq!(&c.ctx, &ctx);
        }
    }
}
