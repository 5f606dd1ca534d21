//! Path simulation and the stopping times attached to a path.

use rand::Rng;

use crate::chamber::{
    in_weyl, min_pairwise_gap, vandermonde_unchecked, weyl_eps_threshold, RawPoint, WeylPoint,
};
use crate::error::{Error, Result};
use crate::walk::law::StepLaw;
use crate::walk::rng::RngStream;

/// A stopping index, or the fact that it did not occur before the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    At(u64),
    Censored,
}

impl Stop {
    pub fn index(self) -> Option<u64> {
        match self {
            Stop::At(n) => Some(n),
            Stop::Censored => None,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, Stop::Censored)
    }

    /// `self <= other`, with a censored time larger than any index.
    pub fn le(self, other: Stop) -> bool {
        match (self, other) {
            (Stop::At(a), Stop::At(b)) => a <= b,
            (_, Stop::Censored) => true,
            (Stop::Censored, Stop::At(_)) => false,
        }
    }
}

/// Everything recorded along one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRecord {
    /// First `n >= 1` with `x + S_n` outside the chamber.
    pub tau: Stop,
    /// First `n >= 1` with `Delta(x + S_n) <= 0`.
    pub t_sign: Stop,
    /// First `n >= 1` with all pairwise gaps above `horizon^{1/2 - eps}`.
    pub nu: Stop,
    /// `max |S_i^{(j)}|` over `i <= min(tau, horizon)`.
    pub m_max: f64,
    /// `x + S` at `min(tau, horizon)`.
    pub endpoint: RawPoint,
    /// `Delta` at `min(tau, horizon)`.
    pub delta_at_stop: f64,
    /// `Delta` at `min(T, last simulated step)`.
    pub delta_at_t: f64,
}

/// Supplies the `k` coordinate increments of one time step.
pub trait StepSource {
    fn next_step(&mut self, out: &mut [f64]);
}

/// Independent draws from a step law.
pub struct LawSteps<'a, R> {
    pub law: &'a StepLaw,
    pub rng: R,
}

impl<R: Rng> StepSource for LawSteps<'_, R> {
    fn next_step(&mut self, out: &mut [f64]) {
        self.law.fill(&mut self.rng, out);
    }
}

/// A fixed, hand-written sequence of steps.
#[derive(Debug, Clone)]
pub struct ScriptedSteps {
    steps: Vec<Vec<f64>>,
    next: usize,
}

impl ScriptedSteps {
    /// `per_coordinate[j][n]` is the `n`-th increment of coordinate `j`.
    pub fn from_coordinate_sequences(per_coordinate: &[Vec<f64>]) -> Result<Self> {
        let len = per_coordinate.first().map_or(0, Vec::len);
        if per_coordinate.iter().any(|s| s.len() != len) {
            return Err(Error::Argument("coordinate sequences differ in length".into()));
        }
        let steps = (0..len)
            .map(|n| per_coordinate.iter().map(|s| s[n]).collect())
            .collect();
        Ok(ScriptedSteps { steps, next: 0 })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl StepSource for ScriptedSteps {
    fn next_step(&mut self, out: &mut [f64]) {
        let s = &self.steps[self.next];
        out.copy_from_slice(s);
        self.next += 1;
    }
}

/// Simulates from `x` until every stopping time is resolved or `horizon`
/// steps have been taken. The chamber check happens at every integer step.
pub fn simulate_with<S: StepSource + ?Sized>(
    x: &WeylPoint,
    horizon: u64,
    eps: f64,
    source: &mut S,
) -> Result<StoppingRecord> {
    if horizon < 1 {
        return Err(Error::Argument("horizon must be >= 1".into()));
    }
    let threshold = weyl_eps_threshold(horizon, eps)?;
    let k = x.k();
    let mut disp = vec![0.0; k];
    let mut step = vec![0.0; k];
    let mut y = x.coords().to_vec();

    let mut tau = Stop::Censored;
    let mut t_sign = Stop::Censored;
    let mut nu = Stop::Censored;
    let mut m_max = 0.0f64;
    let mut endpoint = None;
    let mut delta_at_stop = 0.0;
    let mut delta_at_t = 0.0;

    for n in 1..=horizon {
        source.next_step(&mut step);
        for j in 0..k {
            disp[j] += step[j];
            y[j] = x[j] + disp[j];
        }
        let delta = vandermonde_unchecked(&y);
        if tau.is_censored() {
            for d in &disp {
                m_max = m_max.max(d.abs());
            }
            if !in_weyl(&y) {
                tau = Stop::At(n);
                endpoint = Some(y.clone());
                delta_at_stop = delta;
            }
        }
        if t_sign.is_censored() {
            delta_at_t = delta;
            if delta <= 0.0 {
                t_sign = Stop::At(n);
            }
        }
        if nu.is_censored() && min_pairwise_gap(&y) > threshold {
            nu = Stop::At(n);
        }
        if !tau.is_censored() && !t_sign.is_censored() && !nu.is_censored() {
            break;
        }
    }
    let endpoint = match endpoint {
        Some(e) => e,
        None => {
            delta_at_stop = vandermonde_unchecked(&y);
            y
        }
    };
    Ok(StoppingRecord {
        tau,
        t_sign,
        nu,
        m_max,
        endpoint: RawPoint::new(endpoint),
        delta_at_stop,
        delta_at_t,
    })
}

/// One path from `x` under `law`, driven by `rng`.
pub fn simulate_until(
    x: &WeylPoint,
    law: &StepLaw,
    horizon: u64,
    eps: f64,
    rng: RngStream,
) -> Result<StoppingRecord> {
    let mut src = LawSteps {
        law,
        rng: rng.rng(),
    };
    simulate_with(x, horizon, eps, &mut src)
}

/// Advances `state` in place by up to `steps` steps, stopping at the first
/// exit from the chamber. Returns the exit step (1-based, relative to the
/// call) or `None` if the path survived.
#[inline]
pub(crate) fn advance_to_exit<R: Rng + ?Sized>(
    state: &mut [f64],
    law: &StepLaw,
    steps: u64,
    rng: &mut R,
) -> Option<u64> {
    for n in 1..=steps {
        for v in state.iter_mut() {
            *v += law.sample(rng);
        }
        if !in_weyl(state) {
            return Some(n);
        }
    }
    None
}

/// Like [`advance_to_exit`] but stops at the first `n` with `Delta <= 0`.
#[inline]
pub(crate) fn advance_to_sign_change<R: Rng + ?Sized>(
    state: &mut [f64],
    law: &StepLaw,
    steps: u64,
    rng: &mut R,
) -> Option<u64> {
    for n in 1..=steps {
        for v in state.iter_mut() {
            *v += law.sample(rng);
        }
        if vandermonde_unchecked(state) <= 0.0 {
            return Some(n);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted(seqs: &[&[f64]]) -> ScriptedSteps {
        let v: Vec<Vec<f64>> = seqs.iter().map(|s| s.to_vec()).collect();
        ScriptedSteps::from_coordinate_sequences(&v).unwrap()
    }

    #[test]
    fn tie_exits_immediately() {
        let x = WeylPoint::new(vec![0.0, 2.0]).unwrap();
        let mut src = scripted(&[&[1.0, 1.0], &[-1.0, -1.0]]);
        let r = simulate_with(&x, 2, 0.25, &mut src).unwrap();
        assert_eq!(r.tau, Stop::At(1));
        assert_eq!(r.t_sign, Stop::At(1));
        assert_eq!(r.delta_at_stop, 0.0);
        assert_eq!(r.endpoint.coords(), &[1.0, 1.0]);
    }

    #[test]
    fn surviving_path_is_censored() {
        let x = WeylPoint::new(vec![0.0, 2.0]).unwrap();
        let ups = [1.0; 10];
        let downs = [-1.0; 10];
        // coordinate 1 moves down, coordinate 2 moves up: gap grows
        let mut src = scripted(&[&downs, &ups]);
        let r = simulate_with(&x, 10, 0.25, &mut src).unwrap();
        assert_eq!(r.tau, Stop::Censored);
        assert!(in_weyl(&r.endpoint));
        assert_eq!(r.endpoint.coords(), &[-10.0, 12.0]);
        assert_eq!(r.m_max, 10.0);
    }

    /// A simultaneous double inversion leaves `Delta > 0` outside the
    /// chamber: the exit must be read from the ordering.
    #[test]
    fn exit_read_from_order_not_sign() {
        let x = WeylPoint::new(vec![0.0, 2.0, 4.0]).unwrap();
        // step 1: (0,2,4) -> (3,5,1), a cyclic shift, Delta = 16 > 0
        // step 2: (3,5,1) -> (3,0,1): Delta = (0-3)(1-3)(1-0) = 6 > 0 still
        // step 3: -> (3,0,4): Delta = (-3)(1)(4) = -12 <= 0
        let mut src = scripted(&[&[3.0, 0.0, 0.0], &[3.0, -5.0, 0.0], &[-3.0, 0.0, 3.0]]);
        let r = simulate_with(&x, 3, 0.25, &mut src).unwrap();
        assert_eq!(r.tau, Stop::At(1));
        assert_eq!(r.delta_at_stop, 16.0);
        assert_eq!(r.t_sign, Stop::At(3));
        assert_eq!(r.delta_at_t, -12.0);
        assert!(r.tau.le(r.t_sign));
    }

    #[test]
    fn nu_uses_horizon_threshold() {
        // horizon 16, eps 1/4: threshold 2. Gap 2 -> 4 at step 1 (> 2).
        let x = WeylPoint::new(vec![0.0, 2.0]).unwrap();
        let mut src = scripted(&[&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0]]);
        let r = simulate_with(&x, 3, 0.25, &mut src);
        // horizon 3 gives threshold 3^{1/4} < 2, so time 0 would already
        // qualify; only n >= 1 counts.
        assert_eq!(r.unwrap().nu, Stop::At(1));
    }

    #[test]
    fn rejects_bad_arguments() {
        let x = WeylPoint::new(vec![0.0, 2.0]).unwrap();
        let law = StepLaw::gaussian();
        assert!(simulate_until(&x, &law, 0, 0.25, RngStream::new(1)).is_err());
        assert!(simulate_until(&x, &law, 10, 0.7, RngStream::new(1)).is_err());
    }

    #[test]
    fn stop_ordering() {
        assert!(Stop::At(3).le(Stop::At(3)));
        assert!(Stop::At(3).le(Stop::Censored));
        assert!(!Stop::Censored.le(Stop::At(3)));
    }
}
