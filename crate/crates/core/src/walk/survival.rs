//! Crude Monte Carlo for `P(tau_x > n)`.

use crate::chamber::WeylPoint;
use crate::error::{Error, Result};
use crate::walk::estimate::Estimate;
use crate::walk::law::StepLaw;
use crate::walk::parallel::par_chunks;
use crate::walk::rng::RngStream;
use crate::walk::simulate::advance_to_exit;

fn path_index(i: u64) -> Result<u32> {
    u32::try_from(i).map_err(|_| Error::Argument("at most 2^32 paths per stream".into()))
}

/// Bernoulli estimate of `P(tau_x > n)` from `samples` independent paths.
/// Path `i` draws from `rng.child(0, i)`.
pub fn survival_prob_direct(
    x: &WeylPoint,
    law: &StepLaw,
    n: u64,
    samples: u64,
    rng: RngStream,
) -> Result<Estimate> {
    Ok(survival_profile_direct(x, law, &[n], samples, rng)?[0])
}

/// Survival estimates at several horizons from one set of common paths; the
/// estimates are non-increasing in the horizon by construction.
pub fn survival_profile_direct(
    x: &WeylPoint,
    law: &StepLaw,
    horizons: &[u64],
    samples: u64,
    rng: RngStream,
) -> Result<Vec<Estimate>> {
    if samples < 1 {
        return Err(Error::Argument("samples must be >= 1".into()));
    }
    path_index(samples - 1)?;
    let max_n = horizons.iter().copied().max().unwrap_or(0);
    let parts = par_chunks(samples, |range| {
        let mut counts = vec![0u64; horizons.len()];
        let mut state = x.coords().to_vec();
        for i in range {
            state.copy_from_slice(x.coords());
            let mut r = rng.child(0, i as u32).rng();
            let exit = advance_to_exit(&mut state, law, max_n, &mut r);
            for (c, &h) in counts.iter_mut().zip(horizons) {
                if exit.is_none_or(|t| t > h) {
                    *c += 1;
                }
            }
        }
        counts
    });
    let mut totals = vec![0u64; horizons.len()];
    for p in parts {
        for (t, c) in totals.iter_mut().zip(p) {
            *t += c;
        }
    }
    Ok(totals
        .into_iter()
        .map(|s| Estimate::bernoulli(s, samples))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_monotone_and_consistent() {
        let x = WeylPoint::new(vec![0.0, 1.0, 2.0]).unwrap();
        let law = StepLaw::gaussian();
        let hs = [1, 2, 4, 8, 16, 32];
        let prof = survival_profile_direct(&x, &law, &hs, 20_000, RngStream::new(9)).unwrap();
        for w in prof.windows(2) {
            assert!(w[1].value <= w[0].value);
        }
        let single = survival_prob_direct(&x, &law, 8, 20_000, RngStream::new(9)).unwrap();
        assert_eq!(single.value, prof[3].value);
    }

    #[test]
    fn rejects_zero_samples() {
        let x = WeylPoint::new(vec![0.0, 1.0]).unwrap();
        assert!(survival_prob_direct(&x, &StepLaw::gaussian(), 4, 0, RngStream::new(1)).is_err());
    }
}
