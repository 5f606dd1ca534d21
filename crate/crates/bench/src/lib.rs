//! Shared fixtures for the benchmarks.

use weylwalk::WeylPoint;

/// Equally spaced start `0, spacing, 2 spacing, ...` with `k` coordinates.
pub fn spaced(k: usize, spacing: f64) -> WeylPoint {
    WeylPoint::new((0..k).map(|i| i as f64 * spacing).collect()).expect("spaced points are ordered")
}
