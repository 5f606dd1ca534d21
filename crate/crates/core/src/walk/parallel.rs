//! Index-partitioned parallel loops with a fixed reduction order.

use std::ops::Range;

use rayon::prelude::*;

use crate::walk::estimate::Moments;

/// Work items per chunk. Chunk boundaries depend only on this constant, so
/// per-chunk partial results are identical for every thread count.
pub const CHUNK: u64 = 4096;

/// Runs `f` over consecutive index ranges covering `0..n` and returns the
/// per-chunk results in index order.
pub fn par_chunks<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            f(start..(start + CHUNK).min(n))
        })
        .collect()
}

/// Moments of `f(i)` for `i in 0..n`, merged in chunk order.
pub fn par_moments<F>(n: u64, f: F) -> Moments
where
    F: Fn(u64) -> f64 + Sync,
{
    let parts = par_chunks(n, |r| {
        let mut m = Moments::default();
        for i in r {
            m.push(f(i));
        }
        m
    });
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Number of `i in 0..n` with `f(i)`.
pub fn par_count<F>(n: u64, f: F) -> u64
where
    F: Fn(u64) -> bool + Sync,
{
    par_chunks(n, |r| r.filter(|&i| f(i)).count() as u64)
        .into_iter()
        .sum()
}
