//! The invariant function `V(x) = Delta(x) - E Delta(x + S_tau)` and its
//! relatives.
//!
//! Three Monte Carlo routes are provided:
//!
//! * [`estimate_v_stopped`] averages `Delta` at the exit point over the paths
//!   that exit before the horizon;
//! * [`estimate_v_limit`] averages `Delta(x + S_n)` on `{tau > n}`;
//! * [`estimate_vt`] averages `Delta(x + S_n)` on `{T > n}`.
//!
//! Because `Delta(x + S_n)` is a martingale, `E[Delta(x + S_tau); tau <= N] +
//! E[Delta(x + S_N); tau > N] = Delta(x)`, so the first two routes agree in
//! expectation up to truncation. For two Rademacher walks `V` is known in
//! closed form ([`exact_lattice_v`]).

pub mod properties;
pub mod table;

use log::warn;

use crate::chamber::{in_weyl, vandermonde, vandermonde_unchecked, WeylPoint};
use crate::error::{Error, Result};
use crate::walk::estimate::{Estimate, Moments};
use crate::walk::law::StepLaw;
use crate::walk::parallel::{par_chunks, par_moments};
use crate::walk::rng::RngStream;
use crate::walk::simulate::{advance_to_exit, advance_to_sign_change};

pub use properties::{check_v_properties, PropertyConfig, PropertyGrid, PropertyReport, PropertyRow};
pub use table::{check_harmonicity_table, GapGrid, VTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VMethod {
    Stopped,
    Limit,
    ExactLattice,
}

impl VMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            VMethod::Stopped => "stopped",
            VMethod::Limit => "limit",
            VMethod::ExactLattice => "exact_lattice",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stopped" => Ok(VMethod::Stopped),
            "limit" => Ok(VMethod::Limit),
            "exact_lattice" => Ok(VMethod::ExactLattice),
            other => Err(Error::Format(format!("unknown V method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasNote {
    UnbiasedExact,
    TruncationBiased,
}

/// An estimate of `V` (or `V^(T)`) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VEstimate {
    pub v_hat: Estimate,
    pub method: VMethod,
    pub horizon: u64,
    pub bias_note: BiasNote,
    /// Fraction of paths still alive at the horizon.
    pub censored_fraction: f64,
    /// `v_hat.value <= 0`: unusable as an h-function. Never clamped.
    pub flagged: bool,
}

impl VEstimate {
    fn new(v_hat: Estimate, method: VMethod, horizon: u64, bias: BiasNote, censored: f64) -> Self {
        VEstimate {
            v_hat,
            method,
            horizon,
            bias_note: bias,
            censored_fraction: censored,
            flagged: !(v_hat.value > 0.0),
        }
    }

    pub fn value(&self) -> f64 {
        self.v_hat.value
    }

    pub fn stderr(&self) -> f64 {
        self.v_hat.stderr
    }
}

/// Truncation policy for [`estimate_v_stopped`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Fixed(u64),
    /// Doubles from `initial` until the censored fraction drops below
    /// `censored_target` or `max` is reached.
    Adaptive {
        initial: u64,
        max: u64,
        censored_target: f64,
    },
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon::Adaptive {
            initial: 1024,
            max: 1 << 22,
            censored_target: 0.01,
        }
    }
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::Argument("samples must be >= 1".into()));
    }
    if samples > u64::from(u32::MAX) {
        return Err(Error::Argument("at most 2^32 paths per stream".into()));
    }
    Ok(())
}

/// Per-path exit values at one horizon: moments of `Delta(x + S_tau)` over
/// exited paths and the censored count.
fn exit_values(
    x: &WeylPoint,
    law: &StepLaw,
    horizon: u64,
    samples: u64,
    rng: RngStream,
) -> (Moments, u64) {
    let parts = par_chunks(samples, |range| {
        let mut m = Moments::default();
        let mut censored = 0u64;
        let mut state = x.coords().to_vec();
        for i in range {
            state.copy_from_slice(x.coords());
            let mut r = rng.child(0, i as u32).rng();
            match advance_to_exit(&mut state, law, horizon, &mut r) {
                Some(_) => m.push(vandermonde_unchecked(&state)),
                None => censored += 1,
            }
        }
        (m, censored)
    });
    let mut total = Moments::default();
    let mut censored = 0;
    for (m, c) in &parts {
        total.merge(m);
        censored += c;
    }
    (total, censored)
}

/// `V(x) = Delta(x) - E Delta(x + S_tau)`, with the expectation estimated over
/// the paths that exit by the horizon. Censored paths are excluded from the
/// average and their fraction is reported; the truncation bias is not
/// corrected. Path `i` draws from `rng.child(0, i)`.
pub fn estimate_v_stopped(
    x: &WeylPoint,
    law: &StepLaw,
    horizon: Horizon,
    samples: u64,
    rng: RngStream,
) -> Result<VEstimate> {
    check_samples(samples)?;
    let delta = vandermonde(x)?;
    let (mut h, max, target) = match horizon {
        Horizon::Fixed(n) => (n, n, 1.0),
        Horizon::Adaptive {
            initial,
            max,
            censored_target,
        } => (initial.max(1), max.max(initial), censored_target),
    };
    if h < 1 {
        return Err(Error::Argument("horizon must be >= 1".into()));
    }
    loop {
        let (m, censored) = exit_values(x, law, h, samples, rng);
        let frac = censored as f64 / samples as f64;
        if (frac >= target && h < max) || (m.count() == 0 && h < max) {
            h = (h * 2).min(max);
            continue;
        }
        if m.count() == 0 {
            return Err(Error::Degenerate(format!(
                "no path left the chamber within {h} steps"
            )));
        }
        let exit_mean = m.estimate();
        let v = Estimate::new(delta - exit_mean.value, exit_mean.stderr, samples);
        let bias = if censored == 0 {
            BiasNote::UnbiasedExact
        } else {
            if x.k() == 2 {
                warn!(
                    "k = 2: exit time has infinite mean; {:.3}% of paths censored at {h}",
                    100.0 * frac
                );
            }
            BiasNote::TruncationBiased
        };
        return Ok(VEstimate::new(v, VMethod::Stopped, h, bias, frac));
    }
}

/// Monte Carlo estimate of `E[Delta(x + S_n); tau_x > n]`. At `n = 0` this is
/// `Delta(x)`.
pub fn estimate_v_limit(
    x: &WeylPoint,
    law: &StepLaw,
    n: u64,
    samples: u64,
    rng: RngStream,
) -> Result<VEstimate> {
    check_samples(samples)?;
    let delta = vandermonde(x)?;
    if n == 0 {
        return Ok(VEstimate::new(
            Estimate::new(delta, 0.0, samples),
            VMethod::Limit,
            0,
            BiasNote::UnbiasedExact,
            1.0,
        ));
    }
    let survivors = std::sync::atomic::AtomicU64::new(0);
    let m = par_moments(samples, |i| {
        let mut state = x.coords().to_vec();
        let mut r = rng.child(0, i as u32).rng();
        match advance_to_exit(&mut state, law, n, &mut r) {
            Some(_) => 0.0,
            None => {
                survivors.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                vandermonde_unchecked(&state)
            }
        }
    });
    let censored = survivors.into_inner() as f64 / samples as f64;
    Ok(VEstimate::new(
        m.estimate(),
        VMethod::Limit,
        n,
        BiasNote::TruncationBiased,
        censored,
    ))
}

/// Monte Carlo estimate of `E[Delta(x + S_n); T_x > n]` where `T_x` is the
/// first time `Delta` is non-positive. `x` need only satisfy `Delta(x) > 0`.
pub fn estimate_vt(
    x: &[f64],
    law: &StepLaw,
    n: u64,
    samples: u64,
    rng: RngStream,
) -> Result<VEstimate> {
    check_samples(samples)?;
    let delta = vandermonde(x)?;
    if !(delta > 0.0) {
        return Err(Error::Argument(format!("V^(T) needs Delta(x) > 0, got {delta}")));
    }
    let m = par_moments(samples, |i| {
        let mut state = x.to_vec();
        let mut r = rng.child(0, i as u32).rng();
        match advance_to_sign_change(&mut state, law, n, &mut r) {
            Some(_) => 0.0,
            None => vandermonde_unchecked(&state),
        }
    });
    Ok(VEstimate::new(
        m.estimate(),
        VMethod::Limit,
        n,
        BiasNote::TruncationBiased,
        f64::NAN,
    ))
}

/// `V` for two Rademacher walks at integer gap `gap`: the gap moves on
/// `gap + 2Z`, so it is absorbed at `0` (even gap) or `-1` (odd gap).
pub fn exact_lattice_v(gap: i64) -> Result<f64> {
    if gap <= 0 {
        return Err(Error::Argument(format!("gap must be positive, got {gap}")));
    }
    Ok(if gap % 2 == 0 { gap as f64 } else { gap as f64 + 1.0 })
}

/// A positive function on the chamber used as a Doob transform.
pub trait HFunction: Sync {
    /// `None` where the function is unavailable (flagged table entries,
    /// points outside its domain).
    fn eval(&self, y: &[f64]) -> Option<f64>;
}

impl<F> HFunction for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn eval(&self, y: &[f64]) -> Option<f64> {
        Some(self(y))
    }
}

/// `h = Delta`, harmonic for Brownian motion, not for the walk.
#[derive(Debug, Clone, Copy, Default)]
pub struct VandermondeH;

impl HFunction for VandermondeH {
    fn eval(&self, y: &[f64]) -> Option<f64> {
        Some(vandermonde_unchecked(y))
    }
}

/// Exact `V` for two Rademacher walks; defined on integer gaps.
#[derive(Debug, Clone, Copy, Default)]
pub struct LatticeV;

impl HFunction for LatticeV {
    fn eval(&self, y: &[f64]) -> Option<f64> {
        if y.len() != 2 {
            return None;
        }
        let g = y[1] - y[0];
        let r = g.round();
        if (g - r).abs() > 1e-9 {
            return None;
        }
        exact_lattice_v(r as i64).ok()
    }
}

/// Monte Carlo estimate of `E[h(x + S_1); tau_x > 1] - h(x)`; zero for an
/// invariant `h`. Sample `i` draws from `rng.child(0, i)`.
pub fn check_harmonicity<H: HFunction + ?Sized>(
    x: &WeylPoint,
    law: &StepLaw,
    h: &H,
    samples: u64,
    rng: RngStream,
) -> Result<Estimate> {
    check_samples(samples)?;
    let hx = h
        .eval(x)
        .ok_or_else(|| Error::Argument(format!("h unavailable at {x}")))?;
    let missing = std::sync::atomic::AtomicBool::new(false);
    let m = par_moments(samples, |i| {
        let mut r = rng.child(0, i as u32).rng();
        let y: Vec<f64> = x.iter().map(|v| v + law.sample(&mut r)).collect();
        if !in_weyl(&y) {
            return 0.0;
        }
        h.eval(&y).unwrap_or_else(|| {
            missing.store(true, std::sync::atomic::Ordering::Relaxed);
            0.0
        })
    });
    if missing.into_inner() {
        return Err(Error::Data("h unavailable at a reachable point".into()));
    }
    let e = m.estimate();
    Ok(Estimate::new(e.value - hx, e.stderr, samples))
}

/// Exact `E[h(x + S_1); tau_x > 1] - h(x)` for Rademacher steps, by
/// enumerating the `2^k` sign patterns.
pub fn harmonicity_exact_rademacher<H: HFunction + ?Sized>(x: &WeylPoint, h: &H) -> Result<f64> {
    let k = x.k();
    if k > 20 {
        return Err(Error::Argument("enumeration limited to k <= 20".into()));
    }
    let hx = h
        .eval(x)
        .ok_or_else(|| Error::Argument(format!("h unavailable at {x}")))?;
    let mut total = 0.0;
    let mut y = vec![0.0; k];
    for mask in 0u32..(1 << k) {
        for j in 0..k {
            y[j] = x[j] + if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
        }
        if in_weyl(&y) {
            total += h
                .eval(&y)
                .ok_or_else(|| Error::Data(format!("h unavailable at {y:?}")))?;
        }
    }
    Ok(total / f64::from(1u32 << k) - hx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_v_values() {
        assert_eq!(exact_lattice_v(1).unwrap(), 2.0);
        assert_eq!(exact_lattice_v(2).unwrap(), 2.0);
        assert_eq!(exact_lattice_v(5).unwrap(), 6.0);
        assert!(exact_lattice_v(0).is_err());
        assert!(exact_lattice_v(-3).is_err());
    }

    #[test]
    fn lattice_v_is_harmonic() {
        for g in 1..30 {
            let x = WeylPoint::new(vec![0.0, g as f64]).unwrap();
            assert_eq!(harmonicity_exact_rademacher(&x, &LatticeV).unwrap(), 0.0);
        }
    }

    #[test]
    fn stopped_is_exact_on_lattice() {
        let law = StepLaw::rademacher();
        for g in [1.0, 2.0, 3.0, 4.0] {
            let x = WeylPoint::new(vec![0.0, g]).unwrap();
            let v = estimate_v_stopped(&x, &law, Horizon::Fixed(4096), 2000, RngStream::new(5))
                .unwrap();
            assert_eq!(v.value(), exact_lattice_v(g as i64).unwrap());
            assert_eq!(v.stderr(), 0.0);
        }
    }

    #[test]
    fn limit_at_zero_is_delta() {
        let x = WeylPoint::new(vec![0.0, 1.0, 3.0]).unwrap();
        let v = estimate_v_limit(&x, &StepLaw::gaussian(), 0, 10, RngStream::new(1)).unwrap();
        assert_eq!(v.value(), 6.0);
    }

    #[test]
    fn argument_errors() {
        let x = WeylPoint::new(vec![0.0, 1.0]).unwrap();
        let law = StepLaw::gaussian();
        assert!(estimate_v_stopped(&x, &law, Horizon::Fixed(10), 0, RngStream::new(1)).is_err());
        assert!(estimate_vt(&[1.0, 0.0], &law, 4, 10, RngStream::new(1)).is_err());
    }

    #[test]
    fn vt_equals_limit_at_k2() {
        let x = WeylPoint::new(vec![0.0, 1.5]).unwrap();
        let law = StepLaw::gaussian();
        let s = RngStream::new(8);
        let a = estimate_v_limit(&x, &law, 32, 5000, s).unwrap();
        let b = estimate_vt(&x, &law, 32, 5000, s).unwrap();
        assert_eq!(a.value(), b.value());
    }
}
