//! Goodness-of-fit against the limit laws.
//!
//! At `k = 2` the gap has a closed-form CDF and a (weighted) Kolmogorov-Smirnov
//! test is used. For `k >= 3` the gap vector is binned into cells that are
//! equally likely under the reference law, built by recursive conditional
//! quantiles of a calibration sample; counts are compared with an independent
//! reference sample by a two-sample chi-square homogeneity test.

use std::ops::Deref;

use log::warn;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::chamber::gaps;
use crate::dyson::gue::{gue_gap_cdf_k2, sample_gue};
use crate::dyson::mu::{mu_gap_cdf_k2, sample_mu};
use crate::error::{Error, Result};
use crate::walk::rng::RngStream;

/// Below this effective sample size the report carries a power warning.
pub const MIN_POWER_SAMPLES: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceLaw {
    /// Density proportional to `Delta(y) e^{-|y|^2/2}`.
    Mu,
    /// Density proportional to `Delta(y)^2 e^{-|y|^2/2}`.
    Gue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GofTest {
    KolmogorovSmirnov,
    ChiSquare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofReport {
    pub test: GofTest,
    pub statistic: f64,
    pub p_value: f64,
    pub dof: Option<usize>,
    pub n_eff: f64,
    pub power_warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofOptions {
    /// Cells per gap axis (total `bins^(k-1)`).
    pub bins_per_axis: usize,
    /// Size of each of the calibration and reference samples.
    pub reference_samples: usize,
    pub seed: u64,
}

impl Default for GofOptions {
    fn default() -> Self {
        GofOptions {
            bins_per_axis: 4,
            reference_samples: 100_000,
            seed: 0x5eed,
        }
    }
}

/// Kish effective sample size.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test with optional weights; `n` is the Kish effective size
/// and the p-value uses the Stephens finite-sample correction.
pub fn ks_test<F: Fn(f64) -> f64>(xs: &[f64], weights: Option<&[f64]>, cdf: F) -> Result<(f64, f64, f64)> {
    if xs.is_empty() {
        return Err(Error::Argument("empty sample".into()));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() == xs.len() => w.to_vec(),
        Some(_) => return Err(Error::Dimension("weights and samples differ in length".into())),
        None => vec![1.0; xs.len()],
    };
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Argument("weights sum to zero".into()));
    }
    let mut idx: Vec<usize> = (0..xs.len()).filter(|&i| w[i] > 0.0).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut d: f64 = 0.0;
    let mut cum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let x = xs[idx[i]];
        let f = cdf(x);
        let before = cum / total;
        while i < idx.len() && xs[idx[i]] == x {
            cum += w[idx[i]];
            i += 1;
        }
        let after = cum / total;
        d = d.max((f - before).abs()).max((after - f).abs());
    }
    let n = effective_sample_size(&w);
    let sn = n.sqrt();
    let p = kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
    Ok((d, p, n))
}

/// Two-sample chi-square homogeneity on binned counts. Counts may be
/// fractional (weighted samples scaled to their effective size). Bins empty
/// in both samples are dropped.
pub fn chi2_homogeneity(a: &[f64], b: &[f64]) -> Result<(f64, usize, f64)> {
    if a.len() != b.len() {
        return Err(Error::Dimension("bin count mismatch".into()));
    }
    let na: f64 = a.iter().sum();
    let nb: f64 = b.iter().sum();
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::Argument("empty sample".into()));
    }
    let (ra, rb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut used = 0usize;
    for (x, y) in a.iter().zip(b) {
        if x + y > 0.0 {
            stat += (ra * x - rb * y).powi(2) / (x + y);
            used += 1;
        }
    }
    let dof = used.saturating_sub(1).max(1);
    let p = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Argument(e.to_string()))?
        .sf(stat);
    Ok((stat, dof, p))
}

/// Equal-probability partition of gap space: at depth `d` a cell is split on
/// gap `d` at the conditional quantiles of the calibration points inside it.
#[derive(Debug, Clone)]
pub struct GapPartition {
    bins: usize,
    dims: usize,
    /// Cut points per internal node, indexed by the path of bin choices.
    cuts: Vec<Vec<f64>>,
}

impl GapPartition {
    pub fn calibrate(calibration: &[Vec<f64>], bins: usize) -> Result<Self> {
        let dims = calibration
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Argument("empty calibration sample".into()))?;
        if bins < 2 {
            return Err(Error::Argument("need at least 2 bins per axis".into()));
        }
        let cells = bins.pow(dims as u32);
        if calibration.len() < 5 * cells {
            return Err(Error::Argument(format!(
                "calibration sample of {} too small for {cells} cells",
                calibration.len()
            )));
        }
        let mut cuts = Vec::new();
        let mut level: Vec<Vec<&Vec<f64>>> = vec![calibration.iter().collect()];
        for d in 0..dims {
            let mut next = Vec::with_capacity(level.len() * bins);
            for group in level {
                let mut vals: Vec<f64> = group.iter().map(|g| g[d]).collect();
                vals.sort_by(f64::total_cmp);
                let c: Vec<f64> = (1..bins)
                    .map(|q| vals[(q * vals.len()) / bins])
                    .collect();
                let mut split: Vec<Vec<&Vec<f64>>> = vec![Vec::new(); bins];
                for g in group {
                    split[c.partition_point(|&x| x <= g[d])].push(g);
                }
                cuts.push(c);
                next.extend(split);
            }
            level = next;
        }
        Ok(GapPartition { bins, dims, cuts })
    }

    pub fn cells(&self) -> usize {
        self.bins.pow(self.dims as u32)
    }

    pub fn cell(&self, g: &[f64]) -> usize {
        let mut node = 0;
        let mut cell = 0;
        for d in 0..self.dims {
            let b = self.cuts[node].partition_point(|&x| x <= g[d]);
            cell = cell * self.bins + b;
            // nodes at depth d+1 start after all shallower nodes
            let start: usize = (0..=d).map(|i| self.bins.pow(i as u32)).sum();
            node = start + cell;
        }
        cell
    }

    /// Weighted counts; weights are rescaled to sum to their effective size.
    pub fn counts(&self, gaps: &[Vec<f64>], weights: Option<&[f64]>) -> Vec<f64> {
        let mut c = vec![0.0; self.cells()];
        match weights {
            None => {
                for g in gaps {
                    c[self.cell(g)] += 1.0;
                }
            }
            Some(w) => {
                let s: f64 = w.iter().sum();
                let scale = effective_sample_size(w) / s;
                for (g, wi) in gaps.iter().zip(w) {
                    if *wi > 0.0 {
                        c[self.cell(g)] += wi * scale;
                    }
                }
            }
        }
        c
    }
}

fn reference_gaps(k: usize, law: ReferenceLaw, n: usize, rng: RngStream) -> Result<Vec<Vec<f64>>> {
    let pts = match law {
        ReferenceLaw::Mu => sample_mu(k, n, rng)?,
        ReferenceLaw::Gue => sample_gue(k, 1.0, n, rng)?,
    };
    Ok(pts.iter().map(|p| gaps(p)).collect())
}

/// Tests `samples` (already rescaled to unit scale) against `law`.
pub fn gof_against_law<P: Deref<Target = [f64]>>(
    samples: &[P],
    weights: Option<&[f64]>,
    k: usize,
    law: ReferenceLaw,
    opts: GofOptions,
) -> Result<GofReport> {
    if samples.iter().any(|s| s.len() != k) {
        return Err(Error::Dimension(format!("samples must have k = {k} coordinates")));
    }
    if let Some(w) = weights {
        if w.len() != samples.len() {
            return Err(Error::Dimension("weights and samples differ in length".into()));
        }
    }
    let sample_gaps: Vec<Vec<f64>> = samples.iter().map(|s| gaps(s)).collect();
    let n_eff = weights.map_or(samples.len() as f64, effective_sample_size);
    let power_warning = n_eff < MIN_POWER_SAMPLES;
    if power_warning {
        warn!("goodness-of-fit with effective sample size {n_eff:.0} < {MIN_POWER_SAMPLES}");
    }
    if k == 2 {
        let g: Vec<f64> = sample_gaps.iter().map(|g| g[0]).collect();
        let cdf = match law {
            ReferenceLaw::Mu => mu_gap_cdf_k2,
            ReferenceLaw::Gue => gue_gap_cdf_k2,
        };
        let (d, p, n) = ks_test(&g, weights, cdf)?;
        return Ok(GofReport {
            test: GofTest::KolmogorovSmirnov,
            statistic: d,
            p_value: p,
            dof: None,
            n_eff: n,
            power_warning,
        });
    }
    let base = RngStream::new(opts.seed);
    let calibration = reference_gaps(k, law, opts.reference_samples, base.namespace(1))?;
    let reference = reference_gaps(k, law, opts.reference_samples, base.namespace(2))?;
    let part = GapPartition::calibrate(&calibration, opts.bins_per_axis)?;
    let a = part.counts(&sample_gaps, weights);
    let b = part.counts(&reference, None);
    let (stat, dof, p) = chi2_homogeneity(&a, &b)?;
    Ok(GofReport {
        test: GofTest::ChiSquare,
        statistic: stat,
        p_value: p,
        dof: Some(dof),
        n_eff,
        power_warning,
    })
}

pub fn gof_against_mu<P: Deref<Target = [f64]>>(
    samples: &[P],
    weights: Option<&[f64]>,
    k: usize,
    opts: GofOptions,
) -> Result<GofReport> {
    gof_against_law(samples, weights, k, ReferenceLaw::Mu, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_tail_values() {
        // standard table values
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_exact_statistic() {
        let (d, _, n) = ks_test(&[0.1, 0.4, 0.7], None, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.3).abs() < 1e-12);
        assert_eq!(n, 3.0);
        // duplicated point with weight 2 equals two copies
        let (d1, _, _) = ks_test(&[0.2, 0.5, 0.5], None, |x| x).unwrap();
        let (d2, _, n2) = ks_test(&[0.2, 0.5], Some(&[1.0, 2.0]), |x| x).unwrap();
        assert!((d1 - d2).abs() < 1e-12);
        assert!((n2 - 9.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn chi2_identical_counts() {
        let (s, dof, p) = chi2_homogeneity(&[10.0, 20.0, 30.0], &[20.0, 40.0, 60.0]).unwrap();
        assert!(s.abs() < 1e-12);
        assert_eq!(dof, 2);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partition_is_equal_probability() {
        let cal = reference_gaps(3, ReferenceLaw::Mu, 20_000, RngStream::new(1)).unwrap();
        let part = GapPartition::calibrate(&cal, 4).unwrap();
        let c = part.counts(&cal, None);
        assert_eq!(c.len(), 16);
        for v in c {
            assert!((v - 1250.0).abs() <= 60.0, "{v}");
        }
    }
}
