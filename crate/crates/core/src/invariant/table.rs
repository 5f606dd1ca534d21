//! Tabulated `V` on a tensor grid of gaps, with interpolation.
//!
//! Nodes are points `(0, g_1, g_1 + g_2, ...)`; `V` is translation invariant
//! so only the gaps matter. Interpolation is a tensor product of local cubic
//! Lagrange stencils (linear next to the axis ends) applied to the ratio
//! `rho = V / Delta_1`, where `Delta_1 = prod (1 + x_j - x_i)`, over the gap
//! coordinates clamped to the grid, and the result is multiplied back by
//! `Delta_1(y)`. Unlike `V / Delta`, this ratio stays bounded at the walls.

use std::io::{Read, Write};
use std::path::Path;

use crate::chamber::{gaps, in_weyl, vandermonde_unchecked, WeylPoint};
use crate::error::{Error, Result};
use crate::invariant::{estimate_v_stopped, BiasNote, HFunction, Horizon, VEstimate, VMethod};
use crate::walk::estimate::{CompensatedSum, Estimate};
use crate::walk::law::StepLaw;
use crate::walk::parallel::par_chunks;
use crate::walk::rng::RngStream;

pub const TABLE_FORMAT_VERSION: u32 = 1;

/// One sorted axis of gap values per gap coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GapGrid {
    axes: Vec<Vec<f64>>,
}

impl GapGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Dimension("need at least one gap axis".into()));
        }
        for a in &axes {
            if a.is_empty() {
                return Err(Error::Argument("empty grid axis".into()));
            }
            if !a.iter().all(|g| g.is_finite() && *g > 0.0) {
                return Err(Error::Argument("grid gaps must be positive".into()));
            }
            if a.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Argument("grid axis must be strictly increasing".into()));
            }
        }
        let nodes: usize = axes.iter().map(Vec::len).product();
        if nodes > usize::from(u16::MAX) {
            return Err(Error::Argument(format!("{nodes} nodes; at most 65535")));
        }
        Ok(GapGrid { axes })
    }

    /// The same axis for each of the `k - 1` gaps.
    pub fn uniform(k: usize, axis: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(Error::Dimension(format!("k must be >= 2, got {k}")));
        }
        Self::new(vec![axis; k - 1])
    }

    pub fn k(&self) -> usize {
        self.axes.len() + 1
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gap vector of node `j` (row-major, last axis fastest).
    pub fn node_gaps(&self, mut j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (d, a) in self.axes.iter().enumerate().rev() {
            out[d] = a[j % a.len()];
            j /= a.len();
        }
        out
    }

    fn node_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.len() + i)
    }
}

fn point_from_gaps(g: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(g.len() + 1);
    x.push(0.0);
    let mut s = 0.0;
    for v in g {
        s += v;
        x.push(s);
    }
    x
}

#[derive(Debug, Clone)]
pub struct VTable {
    grid: GapGrid,
    entries: Vec<VEstimate>,
    law: String,
    seed: u64,
    fallback_gap: Option<f64>,
}

impl VTable {
    /// Estimates `V` at every node with [`estimate_v_stopped`]; node `j`
    /// uses `rng.namespace(j)`.
    pub fn build(
        grid: GapGrid,
        law: &StepLaw,
        horizon: Horizon,
        samples: u64,
        rng: RngStream,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(grid.len());
        for j in 0..grid.len() {
            let x = WeylPoint::from_gaps(0.0, &grid.node_gaps(j))?;
            entries.push(estimate_v_stopped(&x, law, horizon, samples, rng.namespace(j as u16))?);
        }
        Ok(VTable {
            grid,
            entries,
            law: law.to_string(),
            seed: rng.seed,
            fallback_gap: None,
        })
    }

    /// A table from precomputed entries (row-major over `grid`).
    pub fn from_entries(
        grid: GapGrid,
        entries: Vec<VEstimate>,
        law: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        if entries.len() != grid.len() {
            return Err(Error::Data(format!(
                "{} entries for {} grid nodes",
                entries.len(),
                grid.len()
            )));
        }
        Ok(VTable {
            grid,
            entries,
            law: law.into(),
            seed,
            fallback_gap: None,
        })
    }

    /// Beyond this minimum gap, [`VTable::value`] returns `Delta(y)`.
    pub fn with_fallback_gap(mut self, gap: f64) -> Self {
        self.fallback_gap = Some(gap);
        self
    }

    pub fn grid(&self) -> &GapGrid {
        &self.grid
    }

    pub fn entries(&self) -> &[VEstimate] {
        &self.entries
    }

    pub fn law(&self) -> &str {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn flagged_count(&self) -> usize {
        self.entries.iter().filter(|e| e.flagged).count()
    }

    /// Coefficients `c_j` with `value(y) = sum_j c_j * v_j`, or `None` outside
    /// the chamber. Empty when the fallback applies.
    pub fn linear_weights(&self, y: &[f64]) -> Option<Vec<(usize, f64)>> {
        if y.len() != self.grid.k() || !in_weyl(y) {
            return None;
        }
        let g = gaps(y);
        if let Some(f) = self.fallback_gap {
            if g.iter().all(|&v| v >= f) {
                return Some(Vec::new());
            }
        }
        let delta_y = shifted_vandermonde(y);
        let axis_w: Vec<Vec<(usize, f64)>> = g
            .iter()
            .zip(&self.grid.axes)
            .map(|(&v, a)| axis_weights(a, v))
            .collect();
        let mut out = Vec::new();
        let mut pos = vec![0usize; axis_w.len()];
        let mut idx = vec![0usize; axis_w.len()];
        loop {
            let mut w = 1.0;
            for (d, &p) in pos.iter().enumerate() {
                let (i, c) = axis_w[d][p];
                idx[d] = i;
                w *= c;
            }
            if w != 0.0 {
                let j = self.grid.node_index(&idx);
                let delta_j = shifted_vandermonde(&point_from_gaps(&self.grid.node_gaps(j)));
                out.push((j, w * delta_y / delta_j));
            }
            // odometer over the per-axis stencils
            let mut d = 0;
            while d < pos.len() {
                pos[d] += 1;
                if pos[d] < axis_w[d].len() {
                    break;
                }
                pos[d] = 0;
                d += 1;
            }
            if d == pos.len() {
                break;
            }
        }
        Some(out)
    }

    /// Interpolated `V(y)`; `None` outside the chamber or if a flagged node
    /// carries weight.
    pub fn value(&self, y: &[f64]) -> Option<f64> {
        let w = self.linear_weights(y)?;
        if w.is_empty() {
            return Some(vandermonde_unchecked(y));
        }
        let mut s = CompensatedSum::default();
        for (j, c) in w {
            let e = &self.entries[j];
            if e.flagged {
                return None;
            }
            s.add(c * e.value());
        }
        Some(s.value())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "version", "k", "gaps", "v_hat", "stderr", "method", "horizon", "law", "seed",
        ])?;
        for (j, e) in self.entries.iter().enumerate() {
            let g: Vec<String> = self.grid.node_gaps(j).iter().map(|v| format!("{v:?}")).collect();
            wr.write_record([
                TABLE_FORMAT_VERSION.to_string(),
                self.grid.k().to_string(),
                g.join(";"),
                format!("{:?}", e.value()),
                format!("{:?}", e.stderr()),
                e.method.as_str().to_string(),
                e.horizon.to_string(),
                self.law.clone(),
                self.seed.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let expected = [
            "version", "k", "gaps", "v_hat", "stderr", "method", "horizon", "law", "seed",
        ];
        if header != expected {
            return Err(Error::Format(format!("unexpected header {header:?}")));
        }
        let mut rows: Vec<(Vec<f64>, VEstimate)> = Vec::new();
        let mut law = None;
        let mut seed = None;
        let mut k = None;
        for rec in rd.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> Result<f64> {
                field(i)
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("column {}: {e}", expected[i])))
            };
            let version: u32 = field(0)
                .parse()
                .map_err(|e| Error::Format(format!("version: {e}")))?;
            if version != TABLE_FORMAT_VERSION {
                return Err(Error::Format(format!("unsupported table version {version}")));
            }
            let rk: usize = field(1).parse().map_err(|e| Error::Format(format!("k: {e}")))?;
            let g = field(2)
                .split(';')
                .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("gaps: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if g.len() + 1 != rk || *k.get_or_insert(rk) != rk {
                return Err(Error::Format("inconsistent k".into()));
            }
            let method = VMethod::parse(field(5))?;
            let horizon: u64 = field(6)
                .parse()
                .map_err(|e| Error::Format(format!("horizon: {e}")))?;
            if law.get_or_insert_with(|| field(7).to_string()) != field(7) {
                return Err(Error::Format("mixed laws in one table".into()));
            }
            let s: u64 = field(8).parse().map_err(|e| Error::Format(format!("seed: {e}")))?;
            if *seed.get_or_insert(s) != s {
                return Err(Error::Format("mixed seeds in one table".into()));
            }
            let est = Estimate::new(num(3)?, num(4)?, 0);
            let bias = if method == VMethod::ExactLattice {
                BiasNote::UnbiasedExact
            } else {
                BiasNote::TruncationBiased
            };
            rows.push((g, VEstimate::new(est, method, horizon, bias, f64::NAN)));
        }
        let k = k.ok_or_else(|| Error::Format("empty table".into()))?;
        let mut axes = vec![Vec::<f64>::new(); k - 1];
        for (g, _) in &rows {
            for (a, &v) in axes.iter_mut().zip(g) {
                a.push(v);
            }
        }
        for a in &mut axes {
            a.sort_by(f64::total_cmp);
            a.dedup();
        }
        let grid = GapGrid::new(axes)?;
        if grid.len() != rows.len() {
            return Err(Error::Format(format!(
                "{} rows do not form a tensor grid of {} nodes",
                rows.len(),
                grid.len()
            )));
        }
        let mut entries: Vec<Option<VEstimate>> = vec![None; grid.len()];
        for (g, e) in rows {
            let idx: Vec<usize> = g
                .iter()
                .zip(&grid.axes)
                .map(|(v, a)| a.iter().position(|n| n == v).unwrap())
                .collect();
            let j = grid.node_index(&idx);
            if entries[j].replace(e).is_some() {
                return Err(Error::Format("duplicate grid node".into()));
            }
        }
        let entries = entries.into_iter().map(Option::unwrap).collect();
        VTable::from_entries(grid, entries, law.unwrap(), seed.unwrap())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn shifted_vandermonde(y: &[f64]) -> f64 {
    let mut p = 1.0;
    for j in 1..y.len() {
        for i in 0..j {
            p *= 1.0 + y[j] - y[i];
        }
    }
    p
}

/// Stencil for one axis: cubic Lagrange on the four surrounding nodes when
/// available, linear next to the ends. The value is clamped to the axis.
fn axis_weights(a: &[f64], v: f64) -> Vec<(usize, f64)> {
    let n = a.len();
    if n == 1 {
        return vec![(0, 1.0)];
    }
    let v = v.clamp(a[0], a[n - 1]);
    let i = a.partition_point(|&x| x <= v).saturating_sub(1).min(n - 2);
    if i == 0 || i + 2 >= n {
        let t = (v - a[i]) / (a[i + 1] - a[i]);
        return vec![(i, 1.0 - t), (i + 1, t)];
    }
    let nodes = [i - 1, i, i + 1, i + 2];
    nodes
        .iter()
        .map(|&m| {
            let w = nodes
                .iter()
                .filter(|&&l| l != m)
                .map(|&l| (v - a[l]) / (a[m] - a[l]))
                .product::<f64>();
            (m, w)
        })
        .collect()
}

impl HFunction for VTable {
    fn eval(&self, y: &[f64]) -> Option<f64> {
        self.value(y)
    }
}

/// Harmonicity check for an interpolated table: Monte Carlo estimate of
/// `E[V(x + S_1); tau_x > 1] - V(x)` whose standard error also carries the
/// node uncertainty, propagated through the interpolation weights (nodes are
/// estimated from independent streams).
pub fn check_harmonicity_table(
    x: &WeylPoint,
    law: &StepLaw,
    table: &VTable,
    samples: u64,
    rng: RngStream,
) -> Result<Estimate> {
    if samples < 2 || samples > u64::from(u32::MAX) {
        return Err(Error::Argument("samples must be in 2..2^32".into()));
    }
    let nodes = table.entries.len();
    let base = table
        .linear_weights(x)
        .ok_or_else(|| Error::Argument(format!("{x} not covered by the table")))?;
    let hx = table
        .value(x)
        .ok_or_else(|| Error::Data("flagged node at the starting point".into()))?;
    let parts = par_chunks(samples, |range| {
        let mut m = crate::walk::estimate::Moments::default();
        let mut coef = vec![0.0; nodes];
        let mut missing = false;
        let mut y = vec![0.0; x.k()];
        for i in range {
            let mut r = rng.child(0, i as u32).rng();
            for (yj, xj) in y.iter_mut().zip(x.iter()) {
                *yj = xj + law.sample(&mut r);
            }
            if !in_weyl(&y) {
                m.push(0.0);
                continue;
            }
            match table.value(&y) {
                Some(v) => {
                    m.push(v);
                    for (j, c) in table.linear_weights(&y).unwrap_or_default() {
                        coef[j] += c;
                    }
                }
                None => missing = true,
            }
        }
        (m, coef, missing)
    });
    let mut m = crate::walk::estimate::Moments::default();
    let mut coef = vec![0.0; nodes];
    for (pm, pc, missing) in &parts {
        if *missing {
            return Err(Error::Data("flagged node reachable in one step".into()));
        }
        m.merge(pm);
        for (c, p) in coef.iter_mut().zip(pc) {
            *c += p;
        }
    }
    for c in &mut coef {
        *c /= samples as f64;
    }
    for (j, c) in base {
        coef[j] -= c;
    }
    let table_var: f64 = coef
        .iter()
        .zip(&table.entries)
        .map(|(c, e)| (c * e.stderr()).powi(2))
        .sum();
    let mc = m.estimate();
    Ok(Estimate::new(
        mc.value - hx,
        mc.stderr.hypot(table_var.sqrt()),
        samples,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_table() -> VTable {
        let grid = GapGrid::uniform(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let entries = (0..4)
            .map(|j| {
                let g = grid.node_gaps(j)[0] as i64;
                VEstimate::new(
                    Estimate::exact(crate::invariant::exact_lattice_v(g).unwrap()),
                    VMethod::ExactLattice,
                    0,
                    BiasNote::UnbiasedExact,
                    0.0,
                )
            })
            .collect();
        VTable::from_entries(grid, entries, "rademacher", 0).unwrap()
    }

    #[test]
    fn interpolates_through_nodes() {
        let t = exact_table();
        for g in 1..=4 {
            let v = t.value(&[0.0, g as f64]).unwrap();
            let e = crate::invariant::exact_lattice_v(g).unwrap();
            assert!((v - e).abs() < 1e-12);
        }
        assert!(t.value(&[1.0, 0.5]).is_none());
    }

    #[test]
    fn weights_reproduce_value() {
        let grid = GapGrid::new(vec![vec![0.5, 1.0, 2.0], vec![0.5, 1.5]]).unwrap();
        let entries = (0..grid.len())
            .map(|j| {
                VEstimate::new(
                    Estimate::new(1.0 + j as f64, 0.1, 10),
                    VMethod::Stopped,
                    100,
                    BiasNote::TruncationBiased,
                    0.0,
                )
            })
            .collect();
        let t = VTable::from_entries(grid, entries, "gaussian", 1).unwrap();
        let y = [0.0, 0.8, 1.9];
        let w = t.linear_weights(&y).unwrap();
        let s: f64 = w.iter().map(|(j, c)| c * t.entries()[*j].value()).sum();
        assert!((s - t.value(&y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fallback_returns_delta() {
        let t = exact_table().with_fallback_gap(10.0);
        assert_eq!(t.value(&[0.0, 12.0]).unwrap(), 12.0);
    }

    #[test]
    fn flagged_nodes_block_evaluation() {
        let grid = GapGrid::uniform(2, vec![1.0, 2.0]).unwrap();
        let mk = |v: f64| {
            VEstimate::new(Estimate::exact(v), VMethod::Stopped, 1, BiasNote::TruncationBiased, 0.0)
        };
        let t = VTable::from_entries(grid, vec![mk(-0.1), mk(2.0)], "gaussian", 0).unwrap();
        assert_eq!(t.flagged_count(), 1);
        assert!(t.value(&[0.0, 1.5]).is_none());
        assert!(t.value(&[0.0, 2.0]).is_some());
    }

    #[test]
    fn csv_round_trip() {
        let grid = GapGrid::new(vec![vec![0.5, 1.0], vec![1.0, 2.0, 4.0]]).unwrap();
        let t = VTable::build(grid, &StepLaw::gaussian(), Horizon::Fixed(256), 200, RngStream::new(4))
            .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = VTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back.grid(), t.grid());
        for (a, b) in back.entries().iter().zip(t.entries()) {
            assert_eq!(a.value(), b.value());
            assert_eq!(a.stderr(), b.stderr());
            assert_eq!(a.horizon, b.horizon);
        }
        assert_eq!(back.law(), "gaussian");
        assert_eq!(back.seed(), 4);
        let bad = String::from_utf8(buf).unwrap().replacen("1,3,", "2,3,", 1);
        assert!(VTable::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn lattice_table_is_harmonic() {
        let t = exact_table().with_fallback_gap(100.0);
        // interior node whose one-step neighbours are all on the grid
        let x = WeylPoint::new(vec![0.0, 2.0]).unwrap();
        let e = check_harmonicity_table(&x, &StepLaw::rademacher(), &t, 20_000, RngStream::new(2))
            .unwrap();
        assert!(e.within(0.0, 4.0), "{e:?}");
    }
}
