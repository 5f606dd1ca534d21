//! Walks conditioned to stay in the chamber.
//!
//! Two routes:
//!
//! * the Doob transform with an h-function (exactly for two Rademacher walks,
//!   approximately via a weighted particle system with a tabulated or
//!   analytic `h`);
//! * conditioning on `{tau > m}` by rejection, feasible for moderate `m`.
//!
//! The particle system propagates particles with the free walk and
//! multiplies weights by `h(y') / h(y)` (zero on exit). Its weighted ensemble
//! targets `P(x + S_n in dy, tau > n) h(y) / h(x)` whatever `h` is; a poor
//! `h` only costs effective sample size. Reweighting by `1 / h` recovers the
//! law of `x + S_n` given `tau > n`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;
use rand::Rng;
use rayon::prelude::*;

use crate::chamber::{in_weyl, WeylPoint};
use crate::error::{Error, Result};
use crate::invariant::{exact_lattice_v, HFunction};
use crate::walk::lattice::{surviving_gap_law, GAP_MOVES};
use crate::walk::law::StepLaw;
use crate::walk::parallel::par_chunks;
use crate::walk::rng::{RngStream, StreamRng};
use crate::walk::simulate::advance_to_exit;

/// Transition law of the gap of two Rademacher walks under the exact
/// `V`-transform: `(next_gap, probability)` for the moves that stay positive.
pub fn htransform_k2_transitions(gap: i64) -> Result<Vec<(i64, f64)>> {
    let v = exact_lattice_v(gap)?;
    Ok(GAP_MOVES
        .iter()
        .filter(|(d, _)| gap + d > 0)
        .map(|&(d, p)| (gap + d, p * exact_lattice_v(gap + d).unwrap() / v))
        .collect())
}

/// One step of the gap under the exact `V`-transform.
pub fn exact_htransform_step_k2<R: Rng + ?Sized>(gap: i64, rng: &mut R) -> Result<i64> {
    let moves = htransform_k2_transitions(gap)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(g, p) in &moves {
        acc += p;
        if u < acc {
            return Ok(g);
        }
    }
    Ok(moves.last().unwrap().0)
}

/// Law of the gap after `n` steps of the exact `V`-transform.
pub fn exact_htransform_marginal_k2(gap: i64, n: u64) -> Result<BTreeMap<i64, f64>> {
    let v = exact_lattice_v(gap)?;
    Ok(surviving_gap_law(gap, n)?
        .into_iter()
        .map(|(g, p)| (g, p * exact_lattice_v(g).unwrap() / v))
        .collect())
}

/// Weighted particles, stored as parallel arrays.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    k: usize,
    /// Row-major `len() x k`.
    pub positions: Vec<f64>,
    /// Unnormalised weights since the last resampling.
    pub weights: Vec<f64>,
    /// `h` at the current position (zero for dead particles).
    pub h_values: Vec<f64>,
    /// `h(y_n) / h(y_{n-1})` of the last step.
    pub h_ratio: Vec<f64>,
    pub step_index: u64,
    pub resample_count: usize,
    log_normalizer: f64,
    h_start: f64,
}

impl ParticleEnsemble {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.k..(i + 1) * self.k]
    }

    /// Kish effective sample size `(sum w)^2 / sum w^2`.
    pub fn ess(&self) -> f64 {
        let s: f64 = self.weights.iter().sum();
        let s2: f64 = self.weights.iter().map(|w| w * w).sum();
        if s2 == 0.0 {
            0.0
        } else {
            s * s / s2
        }
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        normalize(self.weights.clone())
    }

    /// Weights `w_i / h(y_i)`, normalised: the ensemble then targets the law
    /// of `x + S_n` given `tau > n`.
    pub fn survival_reweighted(&self) -> Vec<f64> {
        normalize(
            self.weights
                .iter()
                .zip(&self.h_values)
                .map(|(w, h)| if *w > 0.0 { w / h } else { 0.0 })
                .collect(),
        )
    }

    /// Estimate of `E[h(x + S_n); tau > n] / h(x)`.
    pub fn normalizer(&self) -> f64 {
        let mean = self.weights.iter().sum::<f64>() / self.len() as f64;
        self.log_normalizer.exp() * mean
    }

    /// Estimate of `P(tau > n)`, as `h(x) * normalizer * E[1 / h]` under the
    /// weighted ensemble.
    pub fn survival_estimate(&self) -> f64 {
        let w = self.normalized_weights();
        let inv: f64 = w
            .iter()
            .zip(&self.h_values)
            .map(|(w, h)| if *w > 0.0 { w / h } else { 0.0 })
            .sum();
        self.h_start * self.normalizer() * inv
    }

    /// Drops zero-weight particles.
    pub fn prune(&mut self) {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect();
        let k = self.k;
        // the dropped particles contributed zero mass; rescale so the
        // normalizer is unchanged
        let scale = keep.len() as f64 / self.len() as f64;
        if scale > 0.0 {
            self.log_normalizer += scale.ln();
        }
        self.positions = keep
            .iter()
            .flat_map(|&i| self.positions[i * k..(i + 1) * k].to_vec())
            .collect();
        self.weights = keep.iter().map(|&i| self.weights[i]).collect();
        self.h_values = keep.iter().map(|&i| self.h_values[i]).collect();
        self.h_ratio = keep.iter().map(|&i| self.h_ratio[i]).collect();
    }
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        for v in &mut w {
            *v /= s;
        }
    }
    w
}

/// Systematic resampling indices for `n` draws from normalised `weights`.
pub fn systematic_resample(weights: &[f64], n: usize, offset: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut j = 0;
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    for i in 0..n {
        let u = (i as f64 + offset) / n as f64;
        while j < last && cum + weights[j] <= u {
            cum += weights[j];
            j += 1;
        }
        out.push(j);
    }
    out
}

/// Weighted particle approximation of the `h`-transform of the walk started
/// at `x`, run for `n` steps.
///
/// Particle `i` draws from `rng.child(e, i)` where `e` counts resampling
/// epochs; resampling is systematic, triggered when the ESS drops below half
/// the population, with its offset from `rng.child(e, u32::MAX)`.
pub fn sample_conditioned_paths<H: HFunction + ?Sized>(
    x: &WeylPoint,
    law: &StepLaw,
    n: u64,
    particles: usize,
    h: &H,
    rng: RngStream,
) -> Result<ParticleEnsemble> {
    sample_conditioned_paths_observed(x, law, n, particles, h, rng, |_| Ok(()))
}

/// As [`sample_conditioned_paths`], calling `observe` on the ensemble at
/// step 0 and after every step.
pub fn sample_conditioned_paths_observed<H, F>(
    x: &WeylPoint,
    law: &StepLaw,
    n: u64,
    particles: usize,
    h: &H,
    rng: RngStream,
    mut observe: F,
) -> Result<ParticleEnsemble>
where
    H: HFunction + ?Sized,
    F: FnMut(&ParticleEnsemble) -> Result<()>,
{
    if particles < 2 || particles >= u32::MAX as usize {
        return Err(Error::Argument("particles must be in 2..2^32 - 1".into()));
    }
    let k = x.k();
    let h0 = h
        .eval(x)
        .ok_or_else(|| Error::Argument(format!("h unavailable at {x}")))?;
    if !(h0 > 0.0) {
        return Err(Error::Argument(format!("h(x) = {h0} is not positive")));
    }
    let mut ens = ParticleEnsemble {
        k,
        positions: x.coords().repeat(particles),
        weights: vec![1.0; particles],
        h_values: vec![h0; particles],
        h_ratio: vec![1.0; particles],
        step_index: 0,
        resample_count: 0,
        log_normalizer: 0.0,
        h_start: h0,
    };
    let mut epoch: u16 = 0;
    let mut rngs: Vec<StreamRng> = (0..particles)
        .map(|i| rng.child(epoch, i as u32).rng())
        .collect();
    observe(&ens)?;
    for _ in 0..n {
        let failed = ens
            .positions
            .par_chunks_mut(k)
            .zip(ens.weights.par_iter_mut())
            .zip(ens.h_values.par_iter_mut())
            .zip(ens.h_ratio.par_iter_mut())
            .zip(rngs.par_iter_mut())
            .map_init(
                || vec![0.0; k],
                |buf, ((((pos, w), hv), ratio), r)| {
                    if *w == 0.0 {
                        *ratio = 0.0;
                        return false;
                    }
                    for (b, v) in buf.iter_mut().zip(pos.iter()) {
                        *b = v + law.sample(r);
                    }
                    // a killed particle keeps its last position in W
                    if !in_weyl(buf) {
                        *w = 0.0;
                        *hv = 0.0;
                        *ratio = 0.0;
                        return false;
                    }
                    pos.copy_from_slice(buf);
                    match h.eval(pos) {
                        Some(hn) if hn > 0.0 => {
                            *ratio = hn / *hv;
                            *w *= *ratio;
                            *hv = hn;
                            false
                        }
                        _ => true,
                    }
                },
            )
            .reduce(|| false, |a, b| a || b);
        if failed {
            return Err(Error::Data(format!(
                "h unavailable or non-positive at a reachable point (step {})",
                ens.step_index + 1
            )));
        }
        ens.step_index += 1;
        if ens.weights.iter().all(|&w| w == 0.0) {
            return Err(Error::Degenerate(format!(
                "all particles left the chamber by step {}",
                ens.step_index
            )));
        }
        if ens.ess() < particles as f64 / 2.0 {
            epoch = epoch
                .checked_add(1)
                .filter(|&e| e < u16::MAX)
                .ok_or_else(|| Error::Argument("too many resampling epochs".into()))?;
            resample(&mut ens, rng.child(epoch, u32::MAX).rng().random());
            rngs = (0..particles)
                .map(|i| rng.child(epoch, i as u32).rng())
                .collect();
        }
        observe(&ens)?;
    }
    Ok(ens)
}

fn resample(ens: &mut ParticleEnsemble, offset: f64) {
    let n = ens.len();
    let k = ens.k;
    let mean = ens.weights.iter().sum::<f64>() / n as f64;
    ens.log_normalizer += mean.ln();
    let idx = systematic_resample(&ens.normalized_weights(), n, offset);
    let mut pos = Vec::with_capacity(ens.positions.len());
    for &j in &idx {
        pos.extend_from_slice(&ens.positions[j * k..(j + 1) * k]);
    }
    ens.positions = pos;
    ens.h_values = idx.iter().map(|&j| ens.h_values[j]).collect();
    ens.h_ratio = idx.iter().map(|&j| ens.h_ratio[j]).collect();
    ens.weights = vec![1.0; n];
    ens.resample_count += 1;
}

/// Output of [`sample_conditioned_on_survival`].
#[derive(Debug, Clone)]
pub struct RejectionSample {
    /// Positions at time `n`, row-major.
    pub points: Vec<Vec<f64>>,
    pub attempts: u64,
    pub acceptance_rate: f64,
}

/// Minimum acceptance rate for rejection sampling.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

/// Exact samples of `x + S_n` given `tau_x > m` (`m >= n`) by rejection.
/// Attempt `i` draws from `rng.child(0, i)`; accepted samples are kept in
/// attempt order, so the result does not depend on the thread count.
pub fn sample_conditioned_on_survival(
    x: &WeylPoint,
    law: &StepLaw,
    n: u64,
    m: u64,
    samples: usize,
    rng: RngStream,
) -> Result<RejectionSample> {
    if m < n {
        return Err(Error::Argument(format!(
            "need m >= n, got m = {m}, n = {n}"
        )));
    }
    if samples == 0 {
        return Err(Error::Argument("samples must be >= 1".into()));
    }
    let max_attempts = u64::from(u32::MAX);
    let mut points = Vec::with_capacity(samples);
    let mut attempts = 0u64;
    let mut batch = (samples as u64).max(4096);
    while points.len() < samples {
        if attempts >= max_attempts {
            break;
        }
        let b = batch.min(max_attempts - attempts);
        let start = attempts;
        let parts = par_chunks(b, |range| {
            let mut acc = Vec::new();
            let mut s = vec![0.0; x.k()];
            for i in range {
                let mut r = rng.child(0, (start + i) as u32).rng();
                s.copy_from_slice(x.coords());
                if advance_to_exit(&mut s, law, n, &mut r).is_some() {
                    continue;
                }
                let at_n = s.clone();
                if advance_to_exit(&mut s, law, m - n, &mut r).is_none() {
                    acc.push((start + i, at_n));
                }
            }
            acc
        });
        for (i, p) in parts.into_iter().flatten() {
            if points.len() < samples {
                points.push(p);
                attempts = i + 1;
            }
        }
        if points.len() < samples {
            attempts = start + b;
        }
        let rate = points.len() as f64 / attempts as f64;
        if attempts >= 10_000_000 && rate < MIN_ACCEPTANCE {
            return Err(Error::AcceptanceTooLow { rate });
        }
        batch = batch.saturating_mul(2);
    }
    let rate = points.len() as f64 / attempts as f64;
    if points.len() < samples {
        return Err(Error::AcceptanceTooLow { rate });
    }
    Ok(RejectionSample {
        points,
        attempts,
        acceptance_rate: rate,
    })
}

/// Gzipped CSV dump of particle states: `particle,step,weight,h_ratio,coords`
/// with coordinates joined by `;`.
pub struct PathDumpWriter {
    inner: csv::Writer<GzEncoder<BufWriter<File>>>,
}

impl PathDumpWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let f = BufWriter::new(File::create(path)?);
        let mut inner = csv::Writer::from_writer(GzEncoder::new(f, Compression::default()));
        inner.write_record(["particle", "step", "weight", "h_ratio", "coords"])?;
        Ok(PathDumpWriter { inner })
    }

    pub fn write_ensemble(&mut self, ens: &ParticleEnsemble) -> Result<()> {
        for i in 0..ens.len() {
            let coords: Vec<String> = ens.position(i).iter().map(|v| format!("{v:?}")).collect();
            self.inner.write_record([
                i.to_string(),
                ens.step_index.to_string(),
                format!("{:?}", ens.weights[i]),
                format!("{:?}", ens.h_ratio[i]),
                coords.join(";"),
            ])?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        let enc = self
            .inner
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))?;
        enc.finish()?.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariant::{LatticeV, VandermondeH};
    use crate::walk::lattice::exact_survival_k2;

    #[test]
    fn transitions_are_stochastic() {
        for g in 1..20 {
            let s: f64 = htransform_k2_transitions(g)
                .unwrap()
                .iter()
                .map(|t| t.1)
                .sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert_eq!(htransform_k2_transitions(1).unwrap().len(), 2);
    }

    #[test]
    fn marginal_sums_to_one() {
        for n in [0, 1, 5, 30] {
            let s: f64 = exact_htransform_marginal_k2(3, n).unwrap().values().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn systematic_resample_counts() {
        let idx = systematic_resample(&[0.5, 0.0, 0.25, 0.25], 8, 0.5);
        assert_eq!(idx, vec![0, 0, 0, 0, 2, 2, 3, 3]);
    }

    #[test]
    fn weights_telescope() {
        let x = WeylPoint::new(vec![0.0, 2.0]).unwrap();
        let ens = sample_conditioned_paths(
            &x,
            &StepLaw::rademacher(),
            1,
            500,
            &LatticeV,
            RngStream::new(3),
        )
        .unwrap();
        assert_eq!(ens.resample_count, 0);
        for i in 0..ens.len() {
            let want = if ens.weights[i] > 0.0 {
                ens.h_values[i] / 2.0
            } else {
                0.0
            };
            assert!((ens.weights[i] - want).abs() <= 1e-10 * want.max(1.0));
        }
    }

    #[test]
    fn survival_estimate_close_to_exact() {
        let x = WeylPoint::new(vec![0.0, 2.0]).unwrap();
        let exact = exact_survival_k2(2, 40).unwrap();
        let ens = sample_conditioned_paths(
            &x,
            &StepLaw::rademacher(),
            40,
            20_000,
            &VandermondeH,
            RngStream::new(5),
        )
        .unwrap();
        assert!((ens.survival_estimate() / exact - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejection_sampling_deterministic() {
        let x = WeylPoint::new(vec![0.0, 1.0, 2.0]).unwrap();
        let a =
            sample_conditioned_on_survival(&x, &StepLaw::gaussian(), 4, 8, 300, RngStream::new(2))
                .unwrap();
        let b =
            sample_conditioned_on_survival(&x, &StepLaw::gaussian(), 4, 8, 300, RngStream::new(2))
                .unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.points.len(), 300);
        assert!(a.points.iter().all(|p| in_weyl(p)));
        assert!(a.acceptance_rate > 0.0 && a.acceptance_rate <= 1.0);
        assert!(sample_conditioned_on_survival(
            &x,
            &StepLaw::gaussian(),
            4,
            3,
            1,
            RngStream::new(2)
        )
        .is_err());
    }

    #[test]
    fn all_dead_is_an_error() {
        let x = WeylPoint::new(vec![0.0, 0.01]).unwrap();
        let h = |_: &[f64]| 1.0;
        let r =
            sample_conditioned_paths(&x, &StepLaw::gaussian(), 10_000, 2, &h, RngStream::new(1));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn dump_writes_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("paths.csv.gz");
        let x = WeylPoint::new(vec![0.0, 2.0]).unwrap();
        let mut w = PathDumpWriter::create(&p).unwrap();
        sample_conditioned_paths_observed(
            &x,
            &StepLaw::rademacher(),
            3,
            4,
            &LatticeV,
            RngStream::new(1),
            |e| w.write_ensemble(e),
        )
        .unwrap();
        w.finish().unwrap();
        let mut s = String::new();
        use std::io::Read;
        flate2::read::GzDecoder::new(File::open(&p).unwrap())
            .read_to_string(&mut s)
            .unwrap();
        assert_eq!(s.lines().count(), 1 + 4 * 4);
        assert!(s.starts_with("particle,step,weight,h_ratio,coords"));
    }
}
