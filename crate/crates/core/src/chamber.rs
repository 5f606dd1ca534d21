//! Points of `R^k`, the open Weyl chamber `x_1 < x_2 < ... < x_k`, and
//! Vandermonde products.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Above this many coordinates the Vandermonde product is accumulated in log
/// space. `k(k-1)/2 <= 28` factors of size below `1e10` cannot overflow.
pub const DIRECT_PRODUCT_MAX_K: usize = 8;

/// An arbitrary point of `R^k`, not necessarily ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPoint(Vec<f64>);

impl RawPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        RawPoint(coords)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RawPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for RawPoint {
    fn from(v: Vec<f64>) -> Self {
        RawPoint(v)
    }
}

impl From<WeylPoint> for RawPoint {
    fn from(p: WeylPoint) -> Self {
        RawPoint(p.0)
    }
}

/// A point of the open Weyl chamber: `k >= 2` strictly increasing coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylPoint(Vec<f64>);

impl WeylPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Dimension(format!(
                "a chamber point needs k >= 2 coordinates, got {}",
                coords.len()
            )));
        }
        if !in_weyl(&coords) {
            return Err(Error::OutsideChamber(coords));
        }
        Ok(WeylPoint(coords))
    }

    /// Builds `(base, base + g_1, base + g_1 + g_2, ...)`.
    pub fn from_gaps(base: f64, gaps: &[f64]) -> Result<Self> {
        let mut coords = Vec::with_capacity(gaps.len() + 1);
        coords.push(base);
        let mut acc = base;
        for g in gaps {
            acc += g;
            coords.push(acc);
        }
        WeylPoint::new(coords)
    }

    /// `(0, spacing, 2 spacing, ...)`.
    pub fn equispaced(k: usize, spacing: f64) -> Result<Self> {
        WeylPoint::new((0..k).map(|i| i as f64 * spacing).collect())
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn gaps(&self) -> Vec<f64> {
        gaps(&self.0)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        WeylPoint::new(self.0.iter().map(|v| v * c).collect())
    }
}

impl Deref for WeylPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<RawPoint> for WeylPoint {
    type Error = Error;

    fn try_from(p: RawPoint) -> Result<Self> {
        WeylPoint::new(p.0)
    }
}

impl fmt::Display for WeylPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Sign and log-magnitude of a real number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    /// -1, 0 or +1.
    pub sign: i8,
    /// `ln |value|`; meaningless when `sign == 0`.
    pub log_magnitude: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0,
        log_magnitude: f64::NEG_INFINITY,
    };

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_magnitude.exp(),
        }
    }
}

fn check_dim(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::Dimension(format!(
            "Vandermonde product needs k >= 2, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Adjacent differences `x_{i+1} - x_i`.
pub fn gaps(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Direct pairwise product without dimension checks; hot-path helper.
#[inline]
pub(crate) fn vandermonde_unchecked(x: &[f64]) -> f64 {
    let mut p = 1.0;
    for j in 1..x.len() {
        let xj = x[j];
        for xi in &x[..j] {
            p *= xj - xi;
        }
    }
    p
}

/// `prod_{i<j} (x_j - x_i)`.
pub fn vandermonde(x: &[f64]) -> Result<f64> {
    check_dim(x)?;
    if x.len() <= DIRECT_PRODUCT_MAX_K {
        Ok(vandermonde_unchecked(x))
    } else {
        Ok(vandermonde_signed_log(x)?.to_f64())
    }
}

/// The Vandermonde product as sign and `ln |.|`.
pub fn vandermonde_signed_log(x: &[f64]) -> Result<SignedLog> {
    check_dim(x)?;
    let mut negative = false;
    let mut log_mag = 0.0;
    for j in 1..x.len() {
        for i in 0..j {
            let d = x[j] - x[i];
            if d == 0.0 {
                return Ok(SignedLog::ZERO);
            }
            if d < 0.0 {
                negative = !negative;
            }
            log_mag += d.abs().ln();
        }
    }
    Ok(SignedLog {
        sign: if negative { -1 } else { 1 },
        log_magnitude: log_mag,
    })
}

/// `prod_{i<j} (t + |x_j - x_i|)`.
pub fn perturbed_vandermonde(x: &[f64], t: f64) -> Result<f64> {
    check_dim(x)?;
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("t must be >= 0, got {t}")));
    }
    let mut p = 1.0;
    for j in 1..x.len() {
        for i in 0..j {
            p *= t + (x[j] - x[i]).abs();
        }
    }
    Ok(p)
}

/// Strictly increasing coordinates; ties are outside the open chamber.
#[inline]
pub fn in_weyl(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] < w[1])
}

/// Membership in `W_{n,eps}`: every pairwise gap strictly exceeds
/// `n^{1/2 - eps}`. Ordering is not required.
pub fn in_weyl_eps(x: &[f64], n: u64, eps: f64) -> Result<bool> {
    let threshold = weyl_eps_threshold(n, eps)?;
    Ok(min_pairwise_gap(x) > threshold)
}

pub(crate) fn weyl_eps_threshold(n: u64, eps: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Argument("n must be >= 1".into()));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Argument(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    Ok((n as f64).powf(0.5 - eps))
}

/// Smallest `|x_j - x_i|` over all pairs.
pub(crate) fn min_pairwise_gap(x: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for j in 1..x.len() {
        for i in 0..j {
            m = m.min((x[j] - x[i]).abs());
        }
    }
    m
}
