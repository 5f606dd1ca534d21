//! GUE eigenvalues, the time-`t` law of Dyson Brownian motion from the
//! origin: density proportional to `Delta(y)^2 e^{-|y|^2/(2t)}` on `W`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::erf::erf;

use crate::chamber::WeylPoint;
use crate::error::{Error, Result};
use crate::walk::rng::RngStream;

/// Ordered eigenvalues of a `k x k` GUE matrix scaled by `sqrt(t)`, via the
/// Dumitriu-Edelman tridiagonal model (diagonal `N(0,1)`, off-diagonal
/// `chi_{2(k-i)} / sqrt 2`).
pub fn sample_gue_eigenvalues<R: Rng + ?Sized>(k: usize, t: f64, rng: &mut R) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Argument(format!("k must be >= 2, got {k}")));
    }
    if !(t > 0.0) {
        return Err(Error::Argument(format!("t must be positive, got {t}")));
    }
    let mut m = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = StandardNormal.sample(rng);
    }
    for i in 0..k - 1 {
        let chi2 = ChiSquared::new((2 * (k - 1 - i)) as f64)
            .map_err(|e| Error::Argument(e.to_string()))?;
        let b = (chi2.sample(rng) / 2.0).sqrt();
        m[(i, i + 1)] = b;
        m[(i + 1, i)] = b;
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let s = t.sqrt();
    Ok(ev.into_iter().map(|v| v * s).collect())
}

/// `samples` GUE eigenvalue vectors at time `t`; sample `i` uses
/// `rng.child(0, i)`.
pub fn sample_gue(k: usize, t: f64, samples: usize, rng: RngStream) -> Result<Vec<WeylPoint>> {
    use rayon::prelude::*;
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.child(0, i as u32).rng();
            WeylPoint::new(sample_gue_eigenvalues(k, t, &mut r)?)
        })
        .collect()
}

/// CDF of the gap of the `k = 2` GUE law at `t = 1` (density
/// `g^2 e^{-g^2/4} / (2 sqrt pi)`).
pub fn gue_gap_cdf_k2(g: f64) -> f64 {
    if g <= 0.0 {
        return 0.0;
    }
    erf(g / 2.0) - g / std::f64::consts::PI.sqrt() * (-g * g / 4.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_scaled() {
        let mut r = RngStream::new(1).rng();
        let a = sample_gue_eigenvalues(4, 1.0, &mut r).unwrap();
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        let mut r1 = RngStream::new(1).rng();
        let b = sample_gue_eigenvalues(4, 4.0, &mut r1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn second_moment() {
        // E tr H^2 = k^2 for this normalisation
        let pts = sample_gue(3, 1.0, 40_000, RngStream::new(2)).unwrap();
        let m: f64 = pts.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
            / pts.len() as f64;
        assert!((m - 9.0).abs() < 0.15, "{m}");
    }

    #[test]
    fn gap_cdf_limits() {
        assert_eq!(gue_gap_cdf_k2(-1.0), 0.0);
        assert!((gue_gap_cdf_k2(50.0) - 1.0).abs() < 1e-12);
    }
}
