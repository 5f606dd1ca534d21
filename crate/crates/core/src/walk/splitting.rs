//! Fixed-effort multilevel splitting for small survival probabilities.
//!
//! Time is cut at increasing level times `t_1 < ... < t_L = n`. A population
//! of `N` particles is propagated to the next level time; the survivors are
//! resampled (systematic, equal weights) back to `N`. The product of the
//! per-level survival fractions is an unbiased estimate of `P(tau_x > t_l)`
//! at every level time, so one run yields a whole survival profile.

use rand::Rng;
use rayon::prelude::*;

use crate::chamber::WeylPoint;
use crate::error::{Error, Result};
use crate::walk::estimate::{Estimate, Moments};
use crate::walk::law::StepLaw;
use crate::walk::rng::RngStream;
use crate::walk::simulate::advance_to_exit;

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingConfig {
    pub level_times: Vec<u64>,
    pub particles_per_level: usize,
    /// Independent replicates; the standard error is the batch-means error
    /// across replicates when there are at least two.
    pub replicates: usize,
}

impl SplittingConfig {
    /// Levels at `1, 2, 4, ...` up to and including `n`.
    pub fn dyadic(n: u64, particles_per_level: usize, replicates: usize) -> Self {
        let mut level_times = Vec::new();
        let mut t = 1u64;
        while t < n {
            level_times.push(t);
            t *= 2;
        }
        level_times.push(n);
        SplittingConfig {
            level_times,
            particles_per_level,
            replicates,
        }
    }

    fn validate(&self, n: u64) -> Result<()> {
        if self.level_times.is_empty() || self.level_times[0] < 1 {
            return Err(Error::Argument("level times must start at >= 1".into()));
        }
        if self.level_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("level times must be strictly increasing".into()));
        }
        if *self.level_times.last().unwrap() != n {
            return Err(Error::Argument(format!("last level time must equal n = {n}")));
        }
        if self.particles_per_level < 2 {
            return Err(Error::Argument("need at least 2 particles per level".into()));
        }
        if self.particles_per_level >= u32::MAX as usize {
            return Err(Error::Argument("too many particles per level".into()));
        }
        if self.replicates < 1 {
            return Err(Error::Argument("need at least one replicate".into()));
        }
        if self.replicates * self.level_times.len() > usize::from(u16::MAX) {
            return Err(Error::Argument("too many replicate x level stream groups".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingResult {
    /// Estimate of `P(tau_x > n)`.
    pub estimate: Estimate,
    /// Estimate at every level time, in order.
    pub profile: Vec<(u64, Estimate)>,
    /// Some replicate lost every particle at some level.
    pub degenerate: bool,
    pub degenerate_replicates: usize,
    /// Per-replicate cumulative products, `[replicate][level]`.
    pub replicate_profiles: Vec<Vec<f64>>,
}

/// Splitting estimate of `P(tau_x > n)`.
///
/// Replicate `r`, level `l`, particle `i` steps with
/// `rng.child(r * L + l, i)`; with a single level, a single replicate and
/// `N` particles this is exactly the path set of
/// [`survival_prob_direct`](crate::walk::survival_prob_direct) with `N`
/// samples.
pub fn survival_prob_splitting(
    x: &WeylPoint,
    law: &StepLaw,
    n: u64,
    config: &SplittingConfig,
    rng: RngStream,
) -> Result<SplittingResult> {
    config.validate(n)?;
    let levels = config.level_times.len();
    let mut reps = Vec::with_capacity(config.replicates);
    let mut fractions = Vec::with_capacity(config.replicates);
    let mut degenerate_replicates = 0;
    for r in 0..config.replicates {
        let (cum, fr, dead) = run_replicate(x, law, config, r, rng);
        if dead {
            degenerate_replicates += 1;
        }
        reps.push(cum);
        fractions.push(fr);
    }
    let nparticles = config.particles_per_level as f64;
    let mut profile = Vec::with_capacity(levels);
    for l in 0..levels {
        let est = if config.replicates >= 2 {
            let mut m = Moments::default();
            for rep in &reps {
                m.push(rep[l]);
            }
            m.estimate()
        } else {
            // delta method: relative variance of a product of independent-ish
            // fractions is the sum of their relative variances
            let p = reps[0][l];
            let rel_var: f64 = fractions[0][..=l]
                .iter()
                .map(|&q| if q > 0.0 { (1.0 - q) / (nparticles * q) } else { 0.0 })
                .sum();
            Estimate::new(p, p * rel_var.sqrt(), config.particles_per_level as u64)
        };
        profile.push((config.level_times[l], est));
    }
    Ok(SplittingResult {
        estimate: profile[levels - 1].1,
        profile,
        degenerate: degenerate_replicates > 0,
        degenerate_replicates,
        replicate_profiles: reps,
    })
}

/// Returns the cumulative products, the per-level fractions, and whether the
/// population died out.
fn run_replicate(
    x: &WeylPoint,
    law: &StepLaw,
    config: &SplittingConfig,
    replicate: usize,
    rng: RngStream,
) -> (Vec<f64>, Vec<f64>, bool) {
    let k = x.k();
    let np = config.particles_per_level;
    let levels = config.level_times.len();
    let mut states: Vec<f64> = x.coords().repeat(np);
    let mut alive = vec![false; np];
    let mut cumulative = vec![0.0; levels];
    let mut fractions = vec![0.0; levels];
    let mut product = 1.0;
    let mut prev_t = 0;
    for (l, &t) in config.level_times.iter().enumerate() {
        let group = (replicate * levels + l) as u16;
        let steps = t - prev_t;
        states
            .par_chunks_mut(k)
            .zip(alive.par_iter_mut())
            .enumerate()
            .for_each(|(i, (s, a))| {
                let mut r = rng.child(group, i as u32).rng();
                *a = advance_to_exit(s, law, steps, &mut r).is_none();
            });
        let survivors: Vec<usize> = (0..np).filter(|&i| alive[i]).collect();
        let frac = survivors.len() as f64 / np as f64;
        fractions[l] = frac;
        product *= frac;
        cumulative[l] = product;
        if survivors.is_empty() {
            return (cumulative, fractions, true);
        }
        if l + 1 < levels {
            let offset: f64 = rng.child(group, u32::MAX).rng().random();
            let s = survivors.len();
            let mut next = Vec::with_capacity(states.len());
            for j in 0..np {
                let src = survivors[(((j as f64 + offset) * s as f64) / np as f64) as usize];
                next.extend_from_slice(&states[src * k..(src + 1) * k]);
            }
            states = next;
        }
        prev_t = t;
    }
    (cumulative, fractions, false)
}
