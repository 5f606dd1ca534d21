//! The limit law `mu` on `W`, density `Delta(y) e^{-|y|^2/2} / Z`.
//!
//! Sampling is by rejection from sorted `N(0, 1/(1-a))` vectors: on `W` the
//! ratio target/proposal is proportional to `Delta(y) e^{-a|y|^2/2}`, which
//! is bounded by `M = (k/d)^{d/2} (d/a)^{d/2} e^{-d/2}` with
//! `d = k(k-1)/2` (AM-GM on the `d` squared differences, whose sum is at most
//! `k|y|^2`). `a = (k-1)/(k+1)` maximises the acceptance rate.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::chamber::{in_weyl, vandermonde_unchecked, WeylPoint};
use crate::dyson::constants::mu_normalizer;
use crate::error::{Error, Result};
use crate::walk::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitDensityMu {
    pub k: usize,
    /// `int_W Delta(y) e^{-|y|^2/2} dy`.
    pub z: f64,
}

impl LimitDensityMu {
    pub fn new(k: usize) -> Result<Self> {
        Ok(LimitDensityMu {
            k,
            z: mu_normalizer(k)?,
        })
    }

    /// Normalised density; zero outside `W`.
    pub fn density(&self, y: &[f64]) -> f64 {
        if y.len() != self.k || !in_weyl(y) {
            return 0.0;
        }
        let r2: f64 = y.iter().map(|v| v * v).sum();
        vandermonde_unchecked(y) * (-r2 / 2.0).exp() / self.z
    }
}

pub fn mu_density(y: &[f64], k: usize) -> Result<f64> {
    Ok(LimitDensityMu::new(k)?.density(y))
}

/// Gap density of `mu` at `k = 2`: `g e^{-g^2/4} / 2`.
pub fn mu_gap_density_k2(g: f64) -> f64 {
    if g <= 0.0 {
        0.0
    } else {
        g * (-g * g / 4.0).exp() / 2.0
    }
}

pub fn mu_gap_cdf_k2(g: f64) -> f64 {
    if g <= 0.0 {
        0.0
    } else {
        1.0 - (-g * g / 4.0).exp()
    }
}

/// Rejection constants `(a, ln M)`.
fn envelope(k: usize) -> (f64, f64) {
    let kf = k as f64;
    let d = kf * (kf - 1.0) / 2.0;
    let a = (kf - 1.0) / (kf + 1.0);
    let ln_m = d / 2.0 * (kf / d).ln() + d / 2.0 * (d / a).ln() - d / 2.0;
    (a, ln_m)
}

/// Expected acceptance probability of [`sample_mu`]'s rejection step.
pub fn mu_acceptance_rate(k: usize) -> Result<f64> {
    let (a, ln_m) = envelope(k);
    let z = mu_normalizer(k)?;
    let kf = k as f64;
    let s2 = 1.0 / (1.0 - a);
    let ln_fact: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
    Ok((ln_fact - kf / 2.0 * (2.0 * std::f64::consts::PI * s2).ln() + z.ln() - ln_m).exp())
}

const MAX_TRIES: u32 = 10_000_000;

fn draw<R: Rng + ?Sized>(k: usize, a: f64, ln_m: f64, rng: &mut R) -> Result<Vec<f64>> {
    let s = (1.0 / (1.0 - a)).sqrt();
    let mut y = vec![0.0; k];
    for _ in 0..MAX_TRIES {
        for v in y.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = s * z;
        }
        y.sort_by(f64::total_cmp);
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let ratio = (vandermonde_unchecked(&y).ln() - a * r2 / 2.0 - ln_m).exp();
        if ratio > 1.0 {
            return Err(Error::Envelope(ratio));
        }
        let u: f64 = rng.random();
        if u < ratio {
            return Ok(y);
        }
    }
    Err(Error::AcceptanceTooLow {
        rate: 1.0 / f64::from(MAX_TRIES),
    })
}

/// Independent draws from `mu`; sample `i` uses `rng.child(0, i)`.
pub fn sample_mu(k: usize, samples: usize, rng: RngStream) -> Result<Vec<WeylPoint>> {
    if k < 2 {
        return Err(Error::Argument(format!("k must be >= 2, got {k}")));
    }
    let (a, ln_m) = envelope(k);
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.child(0, i as u32).rng();
            WeylPoint::new(draw(k, a, ln_m, &mut r)?)
        })
        .collect()
}
