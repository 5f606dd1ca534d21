//! Karlin-McGregor formulas for Brownian motion killed on leaving the
//! chamber.
//!
//! The killed transition density is `b_t(y, z) = det[phi_t(z_j - y_i)]` with
//! `phi_t` the centred Gaussian kernel of variance `t`. Survival
//! probabilities are its integral over `z in W`, computed by nested
//! quadrature in gap coordinates after rescaling to `t = 1`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erf;

use crate::chamber::{in_weyl, vandermonde_unchecked, WeylPoint};
use crate::dyson::constants::{constant_k, constant_kappa};
use crate::dyson::quadrature::{integrate_real_line, integrate_semi_infinite, QuadOptions};
use crate::error::{Error, Result};
use crate::walk::estimate::{Estimate, Moments};
use crate::walk::parallel::par_chunks;
use crate::walk::rng::RngStream;

#[inline]
fn phi(x: f64, t: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

fn det_kernel(y: &[f64], z: &[f64], t: f64) -> f64 {
    let k = y.len();
    let m = |i: usize, j: usize| phi(z[j] - y[i], t);
    match k {
        2 => m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
        3 => {
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        }
        _ => DMatrix::from_fn(k, k, m).determinant(),
    }
}

/// Exact killed transition density `det[phi_t(z_j - y_i)]`.
pub fn bm_transition_density_b(y: &WeylPoint, z: &WeylPoint, t: f64) -> Result<f64> {
    if y.k() != z.k() {
        return Err(Error::Dimension(format!("k mismatch: {} vs {}", y.k(), z.k())));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Argument(format!("t must be positive, got {t}")));
    }
    Ok(det_kernel(y, z, t))
}

/// Leading-order form `K t^{-k/2} e^{-|z|^2/(2t)} Delta(y) Delta(z) t^{-k(k-1)/2}`.
pub fn bm_transition_density_asymptotic(y: &WeylPoint, z: &WeylPoint, t: f64) -> Result<f64> {
    let k = y.k();
    let z2: f64 = z.iter().map(|v| v * v).sum();
    Ok(constant_k(k)?
        * t.powf(-(k as f64) / 2.0)
        * (-z2 / (2.0 * t)).exp()
        * vandermonde_unchecked(y)
        * vandermonde_unchecked(z)
        * t.powf(-((k * (k - 1)) as f64) / 2.0))
}

/// `P(tau > t)` for two Brownian motions at gap `g`: `erf(g / (2 sqrt t))`.
pub fn bm_survival_closed_k2(gap: f64, t: f64) -> Result<f64> {
    if !(gap > 0.0) || !(t > 0.0) {
        return Err(Error::Argument("gap and t must be positive".into()));
    }
    Ok(erf(gap / (2.0 * t.sqrt())))
}

/// `kappa Delta(y) t^{-k(k-1)/4}`.
pub fn bm_survival_asymptotic(y: &WeylPoint, t: f64) -> Result<f64> {
    let k = y.k();
    Ok(constant_kappa(k)? * vandermonde_unchecked(y) * t.powf(-((k * (k - 1)) as f64) / 4.0))
}

#[derive(Debug, Clone, Copy)]
pub struct KmBudget {
    pub quad: QuadOptions,
    /// Used for `k >= 4`.
    pub mc_samples: u64,
    pub mc_steps: u64,
    pub seed: u64,
}

impl Default for KmBudget {
    fn default() -> Self {
        KmBudget {
            // the floor lets inner integrals of a cancelling determinant stop
            quad: QuadOptions {
                abs_tol: 1e-14,
                rel_tol: 1e-10,
                max_intervals: 4000,
            },
            mc_samples: 100_000,
            mc_steps: 1000,
            seed: 0,
        }
    }
}

/// `int_W f(z) dz` with `z = (c, c + g_1, ...)`, `c` over the real line.
fn integrate_chamber(k: usize, opts: QuadOptions, f: &dyn Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
    let mut failure = None;
    let r = integrate_real_line(
        |c| {
            let mut z = vec![c];
            match nested(k, &mut z, opts, f) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((r.value, r.error))
}

fn nested(k: usize, z: &mut Vec<f64>, opts: QuadOptions, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    if z.len() == k {
        return Ok(f(z));
    }
    let mut failure = None;
    let last = *z.last().unwrap();
    let r = integrate_semi_infinite(
        |g| {
            z.push(last + g);
            let v = match nested(k, z, opts, f) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            z.pop();
            v
        },
        0.0,
        opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r.value)
}

/// `P(tau^bm_y > t)`: the integral of the Karlin-McGregor determinant over
/// `W` for `k <= 3`; discretely monitored Monte Carlo (an upper bound that
/// converges as `mc_steps` grows) for larger `k`.
pub fn bm_survival_km(y: &WeylPoint, t: f64, budget: KmBudget) -> Result<Estimate> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Argument(format!("t must be positive, got {t}")));
    }
    let k = y.k();
    let ys: Vec<f64> = y.iter().map(|v| v / t.sqrt()).collect();
    if k <= 3 {
        let (v, e) = integrate_chamber(k, budget.quad, &|z| det_kernel(&ys, z, 1.0))?;
        return Ok(Estimate::new(v, e, 0));
    }
    bm_survival_mc(&ys, 1.0, budget.mc_steps, budget.mc_samples, RngStream::new(budget.seed))
}

fn bm_survival_mc(y: &[f64], t: f64, steps: u64, samples: u64, rng: RngStream) -> Result<Estimate> {
    if steps == 0 || samples < 2 || samples > u64::from(u32::MAX) {
        return Err(Error::Argument("need steps >= 1 and samples in 2..2^32".into()));
    }
    let sd = (t / steps as f64).sqrt();
    let parts = par_chunks(samples, |range| {
        let mut m = Moments::default();
        let mut x = vec![0.0; y.len()];
        for i in range {
            let mut r = rng.child(0, i as u32).rng();
            x.copy_from_slice(y);
            let mut alive = true;
            for _ in 0..steps {
                for v in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut r);
                    *v += sd * z;
                }
                if !in_weyl(&x) {
                    alive = false;
                    break;
                }
            }
            m.push(if alive { 1.0 } else { 0.0 });
        }
        m
    });
    let mut m = Moments::default();
    for p in &parts {
        m.merge(p);
    }
    Ok(m.estimate())
}

/// Both sides of `int_W b_s(y, u) b_t(u, z) du = b_{s+t}(y, z)` at `k = 2`.
pub fn chapman_kolmogorov_k2(
    y: &WeylPoint,
    z: &WeylPoint,
    s: f64,
    t: f64,
    opts: QuadOptions,
) -> Result<(f64, f64)> {
    if y.k() != 2 || z.k() != 2 {
        return Err(Error::Dimension("k = 2 only".into()));
    }
    let (lhs, _) = integrate_chamber(2, opts, &|u| det_kernel(y, u, s) * det_kernel(u, z, t))?;
    Ok((lhs, det_kernel(y, z, s + t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> WeylPoint {
        WeylPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn determinant_k2_explicit() {
        let (y, z) = (p(&[0.0, 0.5]), p(&[-0.3, 1.0]));
        let b = bm_transition_density_b(&y, &z, 0.7).unwrap();
        let want = phi(-0.3, 0.7) * phi(0.5, 0.7) - phi(1.0, 0.7) * phi(-0.8, 0.7);
        assert!((b - want).abs() < 1e-15);
    }

    #[test]
    fn general_determinant_matches_explicit() {
        let y = [0.0, 0.4, 1.1];
        let z = [-0.2, 0.9, 1.5];
        let lu = DMatrix::from_fn(3, 3, |i, j| phi(z[j] - y[i], 0.8)).determinant();
        assert!((det_kernel(&y, &z, 0.8) - lu).abs() < 1e-14);
    }

    #[test]
    fn reflection_k2() {
        for (g, t) in [(1.0, 1.0), (0.3, 2.0), (2.5, 0.5)] {
            let km = bm_survival_km(&p(&[0.0, g]), t, KmBudget::default()).unwrap();
            let closed = bm_survival_closed_k2(g, t).unwrap();
            assert!((km.value - closed).abs() < 1e-8, "{g} {t}: {} vs {closed}", km.value);
        }
    }
}
