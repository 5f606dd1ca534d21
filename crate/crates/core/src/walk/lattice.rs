//! Exact computations for two Rademacher walks.
//!
//! With `k = 2` and `+-1` steps the gap `x_2 - x_1` moves by `-2, 0, +2` with
//! probabilities `1/4, 1/2, 1/4` and the pair leaves the chamber as soon as
//! the gap is `<= 0`. Everything here is dynamic programming over the gap
//! distribution; all probabilities are dyadic and therefore exact in `f64`
//! for the horizons used in practice.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Gap increments and their probabilities.
pub const GAP_MOVES: [(i64, f64); 3] = [(-2, 0.25), (0, 0.5), (2, 0.25)];

fn check_gap(gap: i64) -> Result<()> {
    if gap <= 0 {
        return Err(Error::Argument(format!("gap must be positive, got {gap}")));
    }
    Ok(())
}

/// Sub-probability law of the gap at time `n` on `{tau > n}`.
pub fn surviving_gap_law(gap: i64, n: u64) -> Result<BTreeMap<i64, f64>> {
    check_gap(gap)?;
    let mut law = BTreeMap::from([(gap, 1.0)]);
    for _ in 0..n {
        let mut next = BTreeMap::new();
        for (&g, &p) in &law {
            for (d, q) in GAP_MOVES {
                let h = g + d;
                if h > 0 {
                    *next.entry(h).or_insert(0.0) += p * q;
                }
            }
        }
        law = next;
    }
    Ok(law)
}

/// Exact `P(tau > n)` from gap `gap`.
pub fn exact_survival_k2(gap: i64, n: u64) -> Result<f64> {
    Ok(surviving_gap_law(gap, n)?.values().sum())
}

/// Exact law of the gap at time `n` given survival up to `m >= n`.
pub fn exact_conditioned_gap_law_k2(gap: i64, n: u64, m: u64) -> Result<BTreeMap<i64, f64>> {
    if m < n {
        return Err(Error::Argument(format!("need m >= n, got m = {m}, n = {n}")));
    }
    let at_n = surviving_gap_law(gap, n)?;
    let total = exact_survival_k2(gap, m)?;
    let mut out = BTreeMap::new();
    for (g, p) in at_n {
        let p = p * exact_survival_k2(g, m - n)? / total;
        if p > 0.0 {
            out.insert(g, p);
        }
    }
    Ok(out)
}
