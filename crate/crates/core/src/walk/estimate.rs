//! Monte Carlo result carrier and compensated accumulation.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A Monte Carlo estimate with its standard error and a 95% normal interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64, n_samples: u64) -> Self {
        let stderr = stderr.max(0.0);
        Estimate {
            value,
            stderr,
            n_samples,
            ci_low: value - Z95 * stderr,
            ci_high: value + Z95 * stderr,
        }
    }

    /// An exact value (zero standard error).
    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0, 0)
    }

    /// Bernoulli proportion with the binomial standard error.
    pub fn bernoulli(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self::new(f64::NAN, f64::NAN, 0);
        }
        let p = successes as f64 / trials as f64;
        Self::new(p, (p * (1.0 - p) / trials as f64).sqrt(), trials)
    }

    /// Sample mean with `sd / sqrt(n)`, summed in index order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let mut m = Moments::default();
        for &x in xs {
            m.push(x);
        }
        m.estimate()
    }

    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.value.abs()
    }

    /// Number of standard errors separating `self` from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.stderr
    }

    /// `|value - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }

    /// Difference of two independent estimates.
    pub fn minus(&self, other: &Estimate) -> Estimate {
        Estimate::new(
            self.value - other.value,
            self.stderr.hypot(other.stderr),
            self.n_samples.min(other.n_samples),
        )
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }
}

/// First two moments, compensated; feed values in a fixed order for
/// reproducible totals.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    s1: CompensatedSum,
    s2: CompensatedSum,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.s1.add(x);
        self.s2.add(x * x);
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.s1.merge(&other.s1);
        self.s2.merge(&other.s2);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.s1.value() / self.n as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.mean();
        ((self.s2.value() - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn estimate(&self) -> Estimate {
        if self.n == 0 {
            return Estimate::new(f64::NAN, f64::NAN, 0);
        }
        Estimate::new(
            self.mean(),
            (self.variance() / self.n as f64).sqrt(),
            self.n,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_brackets_value() {
        let e = Estimate::new(1.0, 0.5, 10);
        assert!(e.ci_low <= e.value && e.value <= e.ci_high);
        assert!((e.ci_high - e.ci_low - 2.0 * Z95 * 0.5).abs() < 1e-15);
        assert_eq!(Estimate::new(1.0, -1.0, 1).stderr, 0.0);
    }

    #[test]
    fn bernoulli_stderr() {
        let e = Estimate::bernoulli(25, 100);
        assert_eq!(e.value, 0.25);
        assert!((e.stderr - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn moments() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
        let var = 5.0 / 3.0;
        assert!((e.stderr - (var / 4.0f64).sqrt()).abs() < 1e-15);
    }
}
