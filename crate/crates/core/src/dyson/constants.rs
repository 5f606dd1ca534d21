//! Closed-form constants of the Brownian survival asymptotics.
//!
//! With `K = (2 pi)^{-k/2} prod_{l<k} 1/l!` and
//! `I_k = int_{R^k} e^{-|x|^2/2} |Delta(x)| dx = 2^{3k/2} prod_{j=1..k} Gamma(1 + j/2)`,
//! the survival constant is `kappa = K I_k / k!`, so that
//! `P(tau_y > t) ~ kappa Delta(y) t^{-k(k-1)/4}`.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::chamber::vandermonde_unchecked;
use crate::dyson::quadrature::{integrate_semi_infinite, QuadOptions};
use crate::error::{Error, Result};
use crate::walk::estimate::{Estimate, Moments};
use crate::walk::parallel::par_chunks;
use crate::walk::rng::RngStream;

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Argument(format!("k must be >= 2, got {k}")));
    }
    Ok(())
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `ln Gamma(1 + j/2)` by the recursion from `Gamma(1) = 1`,
/// `Gamma(3/2) = sqrt(pi)/2`.
pub fn ln_gamma_one_plus_half(j: usize) -> f64 {
    let mut v = if j % 2 == 0 { 0.0 } else { 0.5 * PI.ln() - 2f64.ln() };
    let mut a = if j % 2 == 0 { 1.0 } else { 1.5 };
    while a < 1.0 + j as f64 / 2.0 - 1e-9 {
        v += a.ln();
        a += 1.0;
    }
    v
}

pub fn constant_k(k: usize) -> Result<f64> {
    check_k(k)?;
    let ln = -(k as f64) / 2.0 * (2.0 * PI).ln() - (0..k).map(ln_factorial).sum::<f64>();
    Ok(ln.exp())
}

/// `ln I_k`, the log of `int |Delta| e^{-|x|^2/2}` over `R^k`.
pub fn ln_closed_integral(k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(1.5 * k as f64 * 2f64.ln() + (1..=k).map(ln_gamma_one_plus_half).sum::<f64>())
}

pub fn closed_integral(k: usize) -> Result<f64> {
    Ok(ln_closed_integral(k)?.exp())
}

/// `Z = int_W Delta e^{-|y|^2/2} dy = I_k / k!`.
pub fn mu_normalizer(k: usize) -> Result<f64> {
    Ok((ln_closed_integral(k)? - ln_factorial(k)).exp())
}

pub fn constant_kappa(k: usize) -> Result<f64> {
    Ok(constant_k(k)? * mu_normalizer(k)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegralMethod {
    /// Nested adaptive quadrature in gap coordinates, `k <= 4`.
    Quadrature { abs_tol: f64 },
    /// Plain Monte Carlo with standard normal draws.
    MonteCarlo { samples: u64, seed: u64 },
}

/// Numerical value of `I_k`.
///
/// Quadrature writes `x = c 1 + (gap coordinates)`, integrates the centre
/// analytically (`sqrt(2 pi / k)`), and the gaps `g in (0, inf)^{k-1}` by
/// nested quadrature over `k! * Delta(g) e^{-Q(g)/2}`.
pub fn gaussian_integral_vandermonde(k: usize, method: IntegralMethod) -> Result<Estimate> {
    check_k(k)?;
    match method {
        IntegralMethod::Quadrature { abs_tol } => {
            if k > 4 {
                return Err(Error::Argument("quadrature supports k <= 4".into()));
            }
            let opts = QuadOptions {
                abs_tol,
                rel_tol: abs_tol,
                max_intervals: 4000,
            };
            let z = integrate_gaps(k, &mut Vec::new(), opts, &|y: &[f64]| {
                let mean = y.iter().sum::<f64>() / y.len() as f64;
                let q: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
                vandermonde_unchecked(y) * (-0.5 * q).exp()
            })?;
            let value = z.0 * (2.0 * PI / k as f64).sqrt() * ln_factorial(k).exp();
            let err = z.1 * (2.0 * PI / k as f64).sqrt() * ln_factorial(k).exp();
            Ok(Estimate::new(value, err, 0))
        }
        IntegralMethod::MonteCarlo { samples, seed } => {
            if samples < 2 || samples > u64::from(u32::MAX) {
                return Err(Error::Argument("samples must be in 2..2^32".into()));
            }
            let rng = RngStream::new(seed);
            let parts = par_chunks(samples, |range| {
                let mut m = Moments::default();
                let mut x = vec![0.0; k];
                for i in range {
                    let mut r = rng.child(0, i as u32).rng();
                    for v in x.iter_mut() {
                        *v = StandardNormal.sample(&mut r);
                    }
                    m.push(vandermonde_unchecked(&x).abs());
                }
                m
            });
            let mut m = Moments::default();
            for p in &parts {
                m.merge(p);
            }
            let scale = (2.0 * PI).powf(k as f64 / 2.0);
            let e = m.estimate();
            Ok(Estimate::new(e.value * scale, e.stderr * scale, samples))
        }
    }
}

/// `int_{(0,inf)^{k-1}} f(0, g_1, g_1 + g_2, ...) dg` by nesting, returning the
/// value and the accumulated error bound of the outermost level.
pub(crate) fn integrate_gaps(
    k: usize,
    prefix: &mut Vec<f64>,
    opts: QuadOptions,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<(f64, f64)> {
    if prefix.len() + 1 == k {
        let mut y = Vec::with_capacity(k);
        y.push(0.0);
        let mut s = 0.0;
        for g in prefix.iter() {
            s += g;
            y.push(s);
        }
        return Ok((f(&y), 0.0));
    }
    let mut failure = None;
    let r = integrate_semi_infinite(
        |g| {
            prefix.push(g);
            let v = match integrate_gaps(k, prefix, opts, f) {
                Ok((v, _)) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            prefix.pop();
            v
        },
        0.0,
        opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((r.value, r.error))
}
