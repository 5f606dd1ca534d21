//! Executable checks of the structural properties of `V` on a grid:
//! monotonicity in the gaps, a bound `V <= c Delta_1` with a frozen constant,
//! `V ~ Delta` at wide separation, and strict positivity.

use crate::chamber::{perturbed_vandermonde, vandermonde, WeylPoint};
use crate::error::{Error, Result};
use crate::invariant::{estimate_v_stopped, Horizon, VEstimate};
use crate::walk::law::StepLaw;
use crate::walk::rng::RngStream;

/// Evaluation points plus a coarse calibration set for the bound constant.
#[derive(Debug, Clone)]
pub struct PropertyGrid {
    pub points: Vec<WeylPoint>,
    pub coarse: Vec<WeylPoint>,
}

impl PropertyGrid {
    /// Twenty points for `k = 2` or `k = 3`; the coarse set spans the same
    /// gap range with fewer nodes.
    pub fn standard(k: usize) -> Result<Self> {
        let from = |g: &[f64]| WeylPoint::from_gaps(0.0, g);
        match k {
            2 => {
                let pts = (0..20)
                    .map(|i| from(&[0.25 * 1.25f64.powi(i)]))
                    .collect::<Result<_>>()?;
                let coarse = [0.25, 1.0, 4.0, 16.0, 0.25 * 1.25f64.powi(19)]
                    .iter()
                    .map(|&g| from(&[g]))
                    .collect::<Result<_>>()?;
                Ok(PropertyGrid { points: pts, coarse })
            }
            3 => {
                let mut pts = Vec::new();
                for g1 in [0.5, 1.0, 2.0, 4.0, 8.0] {
                    for g2 in [0.5, 1.5, 3.0, 6.0] {
                        pts.push(from(&[g1, g2])?);
                    }
                }
                let mut coarse = Vec::new();
                for g1 in [0.5, 2.0, 8.0] {
                    for g2 in [0.5, 6.0] {
                        coarse.push(from(&[g1, g2])?);
                    }
                }
                Ok(PropertyGrid { points: pts, coarse })
            }
            _ => Err(Error::Argument(format!("standard grid exists for k = 2, 3; got {k}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PropertyConfig {
    pub samples: u64,
    pub horizon: Horizon,
    /// Spacing `R` of the point `(0, R, 2R, ...)` for the ratio check.
    pub wide_separation: f64,
    pub wide_samples: u64,
    pub wide_horizon: Horizon,
    /// Allowed band for `V / Delta` at wide separation.
    pub ratio_band: (f64, f64),
    /// Standard errors of slack for the statistical comparisons.
    pub z: f64,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        PropertyConfig {
            samples: 20_000,
            horizon: Horizon::Fixed(10_000),
            wide_separation: 50.0,
            wide_samples: 20_000,
            wide_horizon: Horizon::Fixed(1_000_000),
            ratio_band: (0.9, 1.1),
            z: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyRow {
    pub property: &'static str,
    pub passed: bool,
    /// Number of comparisons made.
    pub checks: usize,
    /// Worst margin (positive means satisfied), in the property's own units.
    pub worst_margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub rows: Vec<PropertyRow>,
    pub estimates: Vec<(WeylPoint, VEstimate)>,
    pub bound_constant: f64,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

/// `y` dominates `x` gap by gap.
fn dominates(y: &WeylPoint, x: &WeylPoint) -> bool {
    x.gaps().iter().zip(y.gaps()).all(|(a, b)| *a <= b)
}

/// Runs the four checks. Grid point `j` uses `rng.namespace(j)`, the coarse
/// set `rng.namespace(1000 + j)` and the wide point `rng.namespace(2000)`.
pub fn check_v_properties(
    law: &StepLaw,
    grid: &PropertyGrid,
    config: &PropertyConfig,
    rng: RngStream,
) -> Result<PropertyReport> {
    let k = grid
        .points
        .first()
        .map(WeylPoint::k)
        .ok_or_else(|| Error::Argument("empty grid".into()))?;
    let est = |x: &WeylPoint, ns: u16| {
        estimate_v_stopped(x, law, config.horizon, config.samples, rng.namespace(ns))
    };
    let estimates: Vec<(WeylPoint, VEstimate)> = grid
        .points
        .iter()
        .enumerate()
        .map(|(j, x)| Ok((x.clone(), est(x, j as u16)?)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();

    // monotone
    let mut worst = f64::INFINITY;
    let mut checks = 0;
    for (x, vx) in &estimates {
        for (y, vy) in &estimates {
            if x == y || !dominates(y, x) {
                continue;
            }
            checks += 1;
            let slack = config.z * vx.stderr().hypot(vy.stderr());
            worst = worst.min(vy.value() + slack - vx.value());
        }
    }
    rows.push(PropertyRow {
        property: "monotone",
        passed: worst >= 0.0,
        checks,
        worst_margin: worst,
        detail: format!("{checks} dominated pairs"),
    });

    // bound with a frozen constant calibrated on the coarse set
    let mut c: f64 = 0.0;
    for (j, x) in grid.coarse.iter().enumerate() {
        let v = est(x, 1000 + j as u16)?;
        c = c.max(v.value() / perturbed_vandermonde(x, 1.0)?);
    }
    let mut worst = f64::INFINITY;
    for (x, v) in &estimates {
        let bound = c * perturbed_vandermonde(x, 1.0)?;
        worst = worst.min((bound + config.z * v.stderr() - v.value()) / bound);
    }
    rows.push(PropertyRow {
        property: "bounded",
        passed: worst >= 0.0,
        checks: estimates.len(),
        worst_margin: worst,
        detail: format!("c = {c:.6}"),
    });

    // ratio at wide separation
    let r = config.wide_separation;
    let wide = WeylPoint::equispaced(k, r)?;
    let v = estimate_v_stopped(&wide, law, config.wide_horizon, config.wide_samples, rng.namespace(2000))?;
    let d = vandermonde(&wide)?;
    let ratio = v.value() / d;
    let (lo, hi) = config.ratio_band;
    rows.push(PropertyRow {
        property: "asymptotic",
        passed: ratio >= lo && ratio <= hi,
        checks: 1,
        worst_margin: (ratio - lo).min(hi - ratio),
        detail: format!(
            "R = {r}: V/Delta = {ratio:.5} (stderr {:.2e}, censored {:.2e})",
            v.stderr() / d,
            v.censored_fraction
        ),
    });

    // positive
    let worst = estimates
        .iter()
        .map(|(_, v)| v.value() - config.z * v.stderr())
        .fold(f64::INFINITY, f64::min);
    rows.push(PropertyRow {
        property: "positive",
        passed: worst > 0.0,
        checks: estimates.len(),
        worst_margin: worst,
        detail: format!("min V - {}se", config.z),
    });

    Ok(PropertyReport {
        rows,
        estimates,
        bound_constant: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grids() {
        assert_eq!(PropertyGrid::standard(2).unwrap().points.len(), 20);
        assert_eq!(PropertyGrid::standard(3).unwrap().points.len(), 20);
        assert!(PropertyGrid::standard(4).is_err());
    }

    #[test]
    fn rademacher_k2_exact_suite() {
        let cfg = PropertyConfig {
            samples: 200,
            horizon: Horizon::Fixed(4096),
            wide_samples: 200,
            wide_horizon: Horizon::Fixed(1 << 16),
            ..PropertyConfig::default()
        };
        let r = check_v_properties(
            &StepLaw::rademacher(),
            &PropertyGrid::standard(2).unwrap(),
            &cfg,
            RngStream::new(1),
        )
        .unwrap();
        assert!(r.all_passed(), "{:#?}", r.rows);
    }
}
