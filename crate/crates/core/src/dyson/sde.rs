//! Euler-Maruyama for Dyson Brownian motion,
//! `dX_i = sum_{j != i} dt / (X_i - X_j) + dB_i`.
//!
//! The step is `min(dt, gap_factor * min_gap^2)`. A step that would leave the
//! chamber is split in two using a Brownian-bridge midpoint of the same
//! increment, recursively up to `max_depth`; the path is never reflected.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::chamber::{in_weyl, min_pairwise_gap, WeylPoint};
use crate::dyson::gue::sample_gue_eigenvalues;
use crate::error::{Error, Result};
use crate::walk::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub enum DysonStart {
    Point(WeylPoint),
    /// Entrance from the origin: the state at the first grid time is drawn
    /// from the GUE law.
    Origin { k: usize },
}

impl DysonStart {
    pub fn k(&self) -> usize {
        match self {
            DysonStart::Point(p) => p.k(),
            DysonStart::Origin { k } => *k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DysonConfig {
    pub dt: f64,
    pub gap_factor: f64,
    pub max_depth: u32,
    /// Hard floor on the minimum gap.
    pub gap_floor: f64,
}

impl Default for DysonConfig {
    fn default() -> Self {
        DysonConfig {
            dt: 1e-3,
            gap_factor: 1e-2,
            max_depth: 30,
            gap_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DysonPath {
    pub times: Vec<f64>,
    /// State at each grid time.
    pub states: Vec<Vec<f64>>,
    pub steps: u64,
    pub refinements: u64,
}

fn drift(x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = x
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &xj)| 1.0 / (x[i] - xj))
            .sum();
    }
}

struct Stepper<'a> {
    cfg: &'a DysonConfig,
    steps: u64,
    refinements: u64,
    buf: Vec<f64>,
}

impl Stepper<'_> {
    /// Advances `x` by time `h` with Brownian increment `dw`.
    fn step<R: Rng + ?Sized>(&mut self, x: &mut [f64], h: f64, dw: &[f64], depth: u32, rng: &mut R) -> Result<()> {
        let k = x.len();
        let mut b = std::mem::take(&mut self.buf);
        b.resize(k, 0.0);
        drift(x, &mut b);
        let proposal: Vec<f64> = (0..k).map(|i| x[i] + b[i] * h + dw[i]).collect();
        self.buf = b;
        if in_weyl(&proposal) && min_pairwise_gap(&proposal) >= self.cfg.gap_floor {
            x.copy_from_slice(&proposal);
            self.steps += 1;
            return Ok(());
        }
        if depth >= self.cfg.max_depth {
            return Err(Error::Integration(format!(
                "gap below {} after {} refinements",
                self.cfg.gap_floor, depth
            )));
        }
        self.refinements += 1;
        // bridge midpoint: W(h/2) = dw/2 + sqrt(h/4) Z
        let sd = (h / 4.0).sqrt();
        let first: Vec<f64> = dw
            .iter()
            .map(|&w| {
                let z: f64 = StandardNormal.sample(rng);
                w / 2.0 + sd * z
            })
            .collect();
        let second: Vec<f64> = dw.iter().zip(&first).map(|(w, f)| w - f).collect();
        self.step(x, h / 2.0, &first, depth + 1, rng)?;
        self.step(x, h / 2.0, &second, depth + 1, rng)
    }

    fn advance<R: Rng + ?Sized>(&mut self, x: &mut [f64], duration: f64, rng: &mut R) -> Result<()> {
        let mut left = duration;
        let mut dw = vec![0.0; x.len()];
        while left > 1e-15 * duration.max(1.0) {
            let g = min_pairwise_gap(x);
            let h = self.cfg.dt.min(self.cfg.gap_factor * g * g).min(left);
            if !(h > 0.0) {
                return Err(Error::Integration(format!("step size collapsed at gap {g}")));
            }
            let sd = h.sqrt();
            for w in dw.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *w = sd * z;
            }
            self.step(x, h, &dw, 0, rng)?;
            left -= h;
        }
        Ok(())
    }
}

/// One Dyson path sampled at the increasing times `t_grid` (`t_grid[0] > 0`
/// for the origin entrance; `0` is allowed for a point start).
pub fn simulate_dyson(
    start: &DysonStart,
    t_grid: &[f64],
    config: &DysonConfig,
    rng: RngStream,
) -> Result<DysonPath> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[0] >= w[1]) || !(t_grid[0] >= 0.0) {
        return Err(Error::Argument("t_grid must be non-negative and strictly increasing".into()));
    }
    if !(config.dt > 0.0 && config.gap_factor > 0.0 && config.gap_floor > 0.0) {
        return Err(Error::Argument("dt, gap_factor and gap_floor must be positive".into()));
    }
    let mut r = rng.rng();
    let (mut x, mut now) = match start {
        DysonStart::Point(p) => (p.coords().to_vec(), 0.0),
        DysonStart::Origin { k } => {
            if !(t_grid[0] > 0.0) {
                return Err(Error::Argument("origin entrance needs t_grid[0] > 0".into()));
            }
            (sample_gue_eigenvalues(*k, t_grid[0], &mut r)?, t_grid[0])
        }
    };
    let mut st = Stepper {
        cfg: config,
        steps: 0,
        refinements: 0,
        buf: Vec::new(),
    };
    let mut states = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        st.advance(&mut x, t - now, &mut r)?;
        now = t;
        states.push(x.clone());
    }
    Ok(DysonPath {
        times: t_grid.to_vec(),
        states,
        steps: st.steps,
        refinements: st.refinements,
    })
}

#[derive(Debug, Clone)]
pub struct DysonBatch {
    /// States at time `t` of the runs that completed, in path order.
    pub endpoints: Vec<Vec<f64>>,
    /// Runs that hit the gap floor; reported, not retried.
    pub discarded: usize,
}

/// `paths` independent runs to time `t`; path `i` uses `rng.child(0, i)`.
pub fn dyson_endpoints(
    start: &DysonStart,
    t: f64,
    config: &DysonConfig,
    paths: usize,
    rng: RngStream,
) -> Result<DysonBatch> {
    let runs: Vec<Result<DysonPath>> = (0..paths)
        .into_par_iter()
        .map(|i| simulate_dyson(start, &[t], config, rng.child(0, i as u32)))
        .collect();
    let mut endpoints = Vec::with_capacity(paths);
    let mut discarded = 0;
    for r in runs {
        match r {
            Ok(mut p) => endpoints.push(p.states.pop().unwrap()),
            Err(Error::Integration(_)) => discarded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(DysonBatch {
        endpoints,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stays_ordered() {
        let x = WeylPoint::new(vec![0.0, 0.05, 0.1]).unwrap();
        let p = simulate_dyson(
            &DysonStart::Point(x),
            &[0.1, 0.5, 1.0],
            &DysonConfig::default(),
            RngStream::new(4),
        )
        .unwrap();
        assert_eq!(p.states.len(), 3);
        assert!(p.states.iter().all(|s| in_weyl(s)));
    }

    #[test]
    fn deterministic() {
        let s = DysonStart::Origin { k: 3 };
        let c = DysonConfig::default();
        let a = simulate_dyson(&s, &[0.5, 1.0], &c, RngStream::new(6)).unwrap();
        let b = simulate_dyson(&s, &[0.5, 1.0], &c, RngStream::new(6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_grid() {
        let s = DysonStart::Origin { k: 2 };
        let c = DysonConfig::default();
        assert!(simulate_dyson(&s, &[1.0, 0.5], &c, RngStream::new(1)).is_err());
        assert!(simulate_dyson(&s, &[0.0, 0.5], &c, RngStream::new(1)).is_err());
    }
}
