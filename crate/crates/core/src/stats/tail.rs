//! Power-law regression of survival probabilities.

use log::warn;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::walk::estimate::Estimate;

/// Points with a larger relative standard error are dropped.
pub const MAX_RELATIVE_STDERR: f64 = 0.3;
pub const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub r_squared: f64,
    /// Horizons used in the fit.
    pub points_used: Vec<u64>,
    /// Horizons dropped (non-positive or too noisy).
    pub excluded: Vec<u64>,
}

impl TailFit {
    /// The exponent estimate `-slope`.
    pub fn exponent(&self) -> f64 {
        -self.slope
    }

    /// Student-t quantile for a two-sided level with `n - 2` degrees of freedom.
    fn t_quantile(&self, level: f64) -> f64 {
        let dof = (self.points_used.len() as f64 - 2.0).max(1.0);
        StudentsT::new(0.0, 1.0, dof)
            .map(|t| t.inverse_cdf(0.5 + level / 2.0))
            .unwrap_or(f64::INFINITY)
    }

    /// Two-sided interval for the slope.
    pub fn slope_ci(&self, level: f64) -> (f64, f64) {
        let q = self.t_quantile(level);
        (self.slope - q * self.stderr_slope, self.slope + q * self.stderr_slope)
    }

    /// Two-sided interval for the exponent `-slope`.
    pub fn exponent_ci(&self, level: f64) -> (f64, f64) {
        let (lo, hi) = self.slope_ci(level);
        (-hi, -lo)
    }

    /// Same fit with the slope standard error replaced by `stderr` when larger.
    pub fn with_min_stderr(mut self, stderr: f64) -> Self {
        if stderr > self.stderr_slope {
            self.stderr_slope = stderr;
        }
        self
    }
}

/// Weighted least squares of `ln p` on `ln n` with weights `1 / relvar`.
///
/// The slope error uses the known-variance formula, inflated by the reduced
/// chi-square when that exceeds one. If any retained point has zero standard
/// error the fit is unweighted and the error is residual-based.
pub fn fit_tail_exponent(points: &[(u64, Estimate)]) -> Result<TailFit> {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for &(n, e) in points {
        let ok = n > 0
            && e.value > 0.0
            && e.value.is_finite()
            && e.stderr.is_finite()
            && e.stderr / e.value <= MAX_RELATIVE_STDERR;
        if ok {
            used.push((n, e));
        } else {
            excluded.push(n);
        }
    }
    if used.len() < MIN_POINTS {
        return Err(Error::Data(format!(
            "{} usable points, need at least {MIN_POINTS}",
            used.len()
        )));
    }
    let exact = used.iter().any(|(_, e)| e.stderr == 0.0);
    let xs: Vec<f64> = used.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, e)| e.value.ln()).collect();
    let ws: Vec<f64> = used
        .iter()
        .map(|(_, e)| if exact { 1.0 } else { (e.value / e.stderr).powi(2) })
        .collect();
    let sw: f64 = ws.iter().sum();
    let xm = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - xm).powi(2)).sum();
    let sxy: f64 = ws
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(w, (x, y))| w * (x - xm) * (y - ym))
        .sum();
    if !(sxx > 0.0) {
        return Err(Error::Data("need at least two distinct horizons".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = ws
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(w, (x, y))| w * (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ws.iter().zip(&ys).map(|(w, y)| w * (y - ym).powi(2)).sum();
    let dof = (used.len() - 2) as f64;
    let stderr_slope = if exact {
        (ss_res / dof / sxx).sqrt()
    } else {
        (1.0 / sxx * (ss_res / dof).max(1.0)).sqrt()
    };
    Ok(TailFit {
        slope,
        intercept,
        stderr_slope,
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
        points_used: used.iter().map(|(n, _)| *n).collect(),
        excluded,
    })
}

/// Standard error of the slope from independent replicate profiles: the
/// spread of per-replicate unweighted fits divided by `sqrt(R)`. Replicates
/// with a non-positive value at any horizon are skipped.
pub fn replicate_slope_stderr(level_times: &[u64], profiles: &[Vec<f64>], min_n: u64) -> Option<f64> {
    let slopes: Vec<f64> = profiles
        .iter()
        .filter_map(|p| {
            let pts: Vec<(u64, Estimate)> = level_times
                .iter()
                .zip(p)
                .filter(|(n, _)| **n >= min_n)
                .map(|(n, v)| (*n, Estimate::exact(*v)))
                .collect();
            if pts.iter().any(|(_, e)| !(e.value > 0.0)) {
                return None;
            }
            fit_tail_exponent(&pts).ok().map(|f| f.slope)
        })
        .collect();
    if slopes.len() < 2 {
        return None;
    }
    let e = Estimate::from_samples(&slopes);
    Some(e.stderr)
}

/// Exponent `(k-j)(k-j-1)/4 + alpha j / 2` for survival with `j` heavy-tailed
/// coordinates; `j = 0` gives `k(k-1)/4`. Warns when `alpha` is outside
/// `(k-j-1, k-j)`.
pub fn conjectured_exponent(k: usize, j: usize, alpha: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Argument(format!("k must be >= 2, got {k}")));
    }
    if j >= k {
        return Err(Error::Argument(format!("need j < k, got j = {j}, k = {k}")));
    }
    let m = (k - j) as f64;
    if j > 0 && !(alpha > m - 1.0 && alpha < m) {
        warn!("alpha = {alpha} outside the regime ({}, {}) for k = {k}, j = {j}", m - 1.0, m);
    }
    Ok(m * (m - 1.0) / 4.0 + alpha * j as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(f: impl Fn(f64) -> f64) -> Vec<(u64, Estimate)> {
        (6..=12).map(|e| 1u64 << e).map(|n| (n, Estimate::exact(f(n as f64)))).collect()
    }

    #[test]
    fn exact_power_laws() {
        let fit = fit_tail_exponent(&synth(|n| n.powf(-1.5))).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-12);
        let fit = fit_tail_exponent(&synth(|n| 0.3 * n.powi(-3))).unwrap();
        assert!((fit.slope + 3.0).abs() < 1e-12);
        assert!((fit.intercept - 0.3f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_points_excluded() {
        let mut pts: Vec<(u64, Estimate)> = synth(|n| n.powf(-1.5))
            .into_iter()
            .map(|(n, e)| (n, Estimate::new(e.value, 0.01 * e.value, 100)))
            .collect();
        pts.push((8192, Estimate::new(1e-6, 1e-6, 100)));
        pts.push((16384, Estimate::new(0.0, 0.0, 100)));
        let fit = fit_tail_exponent(&pts).unwrap();
        assert_eq!(fit.excluded, vec![8192, 16384]);
        assert!((fit.slope + 1.5).abs() < 1e-12);
        let (lo, hi) = fit.slope_ci(0.95);
        assert!(lo < fit.slope && fit.slope < hi);
    }

    #[test]
    fn too_few_points() {
        let pts = synth(|n| n.powf(-1.0));
        assert!(fit_tail_exponent(&pts[..3]).is_err());
    }

    #[test]
    fn conjectured_values() {
        assert_eq!(conjectured_exponent(4, 1, 2.5).unwrap(), 2.75);
        assert_eq!(conjectured_exponent(5, 2, 2.5).unwrap(), 4.0);
        assert_eq!(conjectured_exponent(3, 0, 7.0).unwrap(), 1.5);
        assert!(conjectured_exponent(3, 3, 2.0).is_err());
    }
}
