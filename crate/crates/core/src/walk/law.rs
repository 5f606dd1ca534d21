//! Centered increment distributions.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    Gaussian,
    /// `+1` or `-1` with probability 1/2.
    Rademacher,
    Uniform,
    Laplace,
    /// `R (P - m)` with `P ~ Pareto(alpha)` on `[1, inf)`, `m = E P` and `R` a
    /// uniform sign. Requires `alpha > 2`.
    SymmetrizedPareto { alpha: f64 },
    StudentT { nu: f64 },
}

/// A mean-zero step distribution, optionally scaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLaw {
    kind: StepKind,
    variance_normalized: bool,
    /// Multiplier applied to a raw draw.
    scale: f64,
}

impl StepLaw {
    pub fn new(kind: StepKind, variance_normalized: bool) -> Result<Self> {
        match kind {
            StepKind::SymmetrizedPareto { alpha } if !(alpha > 2.0) => {
                return Err(Error::Argument(format!(
                    "symmetrized Pareto needs alpha > 2, got {alpha}"
                )))
            }
            StepKind::StudentT { nu } if !(nu > 2.0) => {
                return Err(Error::Argument(format!("Student t needs nu > 2, got {nu}")))
            }
            _ => {}
        }
        let scale = if variance_normalized {
            1.0 / raw_variance(kind).sqrt()
        } else {
            1.0
        };
        Ok(StepLaw {
            kind,
            variance_normalized,
            scale,
        })
    }

    pub fn gaussian() -> Self {
        Self::new(StepKind::Gaussian, true).unwrap()
    }

    pub fn rademacher() -> Self {
        Self::new(StepKind::Rademacher, true).unwrap()
    }

    pub fn uniform() -> Self {
        Self::new(StepKind::Uniform, true).unwrap()
    }

    pub fn laplace() -> Self {
        Self::new(StepKind::Laplace, true).unwrap()
    }

    pub fn symmetrized_pareto(alpha: f64) -> Result<Self> {
        Self::new(StepKind::SymmetrizedPareto { alpha }, true)
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        Self::new(StepKind::StudentT { nu }, true)
    }

    pub fn kind(&self) -> StepKind {
        self.kind
    }

    pub fn variance_normalized(&self) -> bool {
        self.variance_normalized
    }

    /// Largest `a` with `E|xi|^a < inf`; infinite for bounded and Gaussian laws.
    pub fn declared_moment_index(&self) -> f64 {
        match self.kind {
            StepKind::SymmetrizedPareto { alpha } => alpha,
            StepKind::StudentT { nu } => nu,
            _ => f64::INFINITY,
        }
    }

    pub fn variance(&self) -> f64 {
        raw_variance(self.kind) * self.scale * self.scale
    }

    /// Steps live on the integer lattice.
    pub fn is_lattice(&self) -> bool {
        matches!(self.kind, StepKind::Rademacher) && self.scale == 1.0
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let raw = match self.kind {
            StepKind::Gaussian => StandardNormal.sample(rng),
            StepKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            StepKind::Uniform => 2.0 * rng.random::<f64>() - 1.0,
            StepKind::Laplace => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            StepKind::SymmetrizedPareto { alpha } => {
                let u = 1.0 - rng.random::<f64>();
                let p = u.powf(-1.0 / alpha);
                let m = alpha / (alpha - 1.0);
                if rng.random::<bool>() {
                    p - m
                } else {
                    m - p
                }
            }
            StepKind::StudentT { nu } => StudentT::new(nu).unwrap().sample(rng),
        };
        raw * self.scale
    }

    /// Fills `out` with independent steps.
    #[inline]
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out {
            *v = self.sample(rng);
        }
    }

    /// Exact `P(|xi| > u)` for `u >= 0`.
    pub fn abs_tail(&self, u: f64) -> f64 {
        let r = u / self.scale;
        match self.kind {
            StepKind::Gaussian => 2.0 * Normal::standard().sf(r),
            StepKind::Rademacher => {
                if r < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            StepKind::Uniform => (1.0 - r).max(0.0),
            StepKind::Laplace => (-r).exp(),
            StepKind::SymmetrizedPareto { alpha } => {
                let m = alpha / (alpha - 1.0);
                let sf = |p: f64| if p <= 1.0 { 1.0 } else { p.powf(-alpha) };
                // |P - m| > r  <=>  P > m + r  or  P < m - r
                sf(m + r) + (1.0 - sf(m - r))
            }
            StepKind::StudentT { nu } => {
                2.0 * StudentsT::new(0.0, 1.0, nu).unwrap().sf(r)
            }
        }
    }

    /// Stable textual form, e.g. `gaussian`, `pareto:2.5`, `student_t:3@raw`.
    pub fn descriptor(&self) -> String {
        self.to_string()
    }
}

fn raw_variance(kind: StepKind) -> f64 {
    match kind {
        StepKind::Gaussian | StepKind::Rademacher => 1.0,
        StepKind::Uniform => 1.0 / 3.0,
        StepKind::Laplace => 2.0,
        StepKind::SymmetrizedPareto { alpha } => {
            alpha / ((alpha - 1.0) * (alpha - 1.0) * (alpha - 2.0))
        }
        StepKind::StudentT { nu } => nu / (nu - 2.0),
    }
}

impl fmt::Display for StepLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            StepKind::Gaussian => write!(f, "gaussian")?,
            StepKind::Rademacher => write!(f, "rademacher")?,
            StepKind::Uniform => write!(f, "uniform")?,
            StepKind::Laplace => write!(f, "laplace")?,
            StepKind::SymmetrizedPareto { alpha } => write!(f, "pareto:{alpha}")?,
            StepKind::StudentT { nu } => write!(f, "student_t:{nu}")?,
        }
        if !self.variance_normalized {
            write!(f, "@raw")?;
        }
        Ok(())
    }
}

impl FromStr for StepLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, normalized) = match s.strip_suffix("@raw") {
            Some(b) => (b, false),
            None => (s, true),
        };
        let (name, param) = match body.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (body, None),
        };
        let param = |what: &str| -> Result<f64> {
            param
                .ok_or_else(|| Error::Format(format!("law `{s}` needs a {what} parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("law `{s}`: {e}")))
        };
        let kind = match name {
            "gaussian" | "normal" => StepKind::Gaussian,
            "rademacher" => StepKind::Rademacher,
            "uniform" => StepKind::Uniform,
            "laplace" => StepKind::Laplace,
            "pareto" | "symmetrized_pareto" => StepKind::SymmetrizedPareto {
                alpha: param("alpha")?,
            },
            "student_t" | "t" => StepKind::StudentT { nu: param("nu")? },
            other => return Err(Error::Format(format!("unknown step law `{other}`"))),
        };
        StepLaw::new(kind, normalized)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::rng::RngStream;

    fn all_laws() -> Vec<StepLaw> {
        vec![
            StepLaw::gaussian(),
            StepLaw::rademacher(),
            StepLaw::uniform(),
            StepLaw::laplace(),
            StepLaw::symmetrized_pareto(4.5).unwrap(),
            StepLaw::student_t(5.0).unwrap(),
        ]
    }

    #[test]
    fn rademacher_support() {
        let mut rng = RngStream::new(1).rng();
        let law = StepLaw::rademacher();
        assert!(law.is_lattice());
        for _ in 0..10_000 {
            let v = law.sample(&mut rng);
            assert!(v == 1.0 || v == -1.0);
        }
    }

    #[test]
    fn gaussian_mean_clt_bound() {
        let mut rng = RngStream::new(2).rng();
        let law = StepLaw::gaussian();
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    /// Unit variance to within 3 standard errors at 1e6 draws. The standard
    /// error of the sample variance uses the sample fourth moment.
    #[test]
    fn moment_self_test() {
        for (i, law) in all_laws().into_iter().enumerate() {
            let mut rng = RngStream::new(3).child(0, i as u32).rng();
            let n = 1_000_000usize;
            let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
            for _ in 0..n {
                let v = law.sample(&mut rng);
                s1 += v;
                s2 += v * v;
                s4 += v * v * v * v;
            }
            let nf = n as f64;
            let mean = s1 / nf;
            let m2 = s2 / nf;
            let m4 = s4 / nf;
            let se_mean = (m2 / nf).sqrt();
            let se_var = ((m4 - m2 * m2) / nf).sqrt();
            assert!(mean.abs() < 3.0 * se_mean, "{law}: mean {mean}");
            assert!((m2 - 1.0).abs() <= 3.0 * se_var, "{law}: var {m2} (se {se_var})");
            assert!((law.variance() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_tail_matches_empirical() {
        for (i, law) in all_laws().into_iter().enumerate() {
            let mut rng = RngStream::new(4).child(0, i as u32).rng();
            let n = 200_000;
            let u = 1.3;
            let hits = (0..n).filter(|_| law.sample(&mut rng).abs() > u).count();
            let p = law.abs_tail(u);
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-9);
            let phat = hits as f64 / n as f64;
            assert!((phat - p).abs() < 4.0 * se, "{law}: {phat} vs {p}");
        }
    }

    #[test]
    fn moment_index_and_validation() {
        assert_eq!(StepLaw::gaussian().declared_moment_index(), f64::INFINITY);
        assert_eq!(StepLaw::symmetrized_pareto(2.5).unwrap().declared_moment_index(), 2.5);
        assert!(StepLaw::symmetrized_pareto(2.0).is_err());
        assert!(StepLaw::student_t(1.5).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        for law in all_laws() {
            let back: StepLaw = law.descriptor().parse().unwrap();
            assert_eq!(back, law);
        }
        let raw: StepLaw = "laplace@raw".parse().unwrap();
        assert!(!raw.variance_normalized());
        assert!((raw.variance() - 2.0).abs() < 1e-15);
        assert!("cauchy".parse::<StepLaw>().is_err());
        assert!("pareto".parse::<StepLaw>().is_err());
    }
}
