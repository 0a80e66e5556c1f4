//! Hadamard graphs over `E × F` tangent blocks and their transport by the
//! map.
//!
//! A chart at `x` uses orthonormal bases `B_E`, `B_F`; a point of the block is
//! `(a, b)` with `v₁ = B_E a`, `v₂ = B_F b`, and blocks are coordinate boxes
//! `|a_i| ≤ r_E`, `|b_j| ≤ r_F`. A graph stores `G(a, b)` (in `E`
//! coordinates) on a tensor grid and interpolates multilinearly. Leaves are
//! `b ↦ Φ(a, b) = B_E (a + G(a, b)) + B_F b`.
//!
//! The graph transform and the re-basing of a graph share one resampling
//! engine: given a local map `L` into a target chart, the leaf through `a`
//! is carried to `L(leaf)`, its intersection with the target `E` gives `u₁`,
//! and for each target node `(u₁, u₂)` the leaf parameter `b` with
//! `π_F L(Φ(a, b)) = u₂` gives `G₁ = −u₁ + π_E L(Φ(a, b))`.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{domination_profile, Frame, SplittingField};
use crate::dynamics::{Diffeo, TorusPoint};
use crate::error::{DomlabError, Result};
use crate::numeric::{bracketed_root, box_newton, operator_norm, orthonormalize, subspace_distance};
use crate::rng::indexed_rng;

pub const MIN_NODES: usize = 33;
/// Fraction of the inscribed image radius kept as the next chart radius.
pub const RADIUS_MARGIN: f64 = 0.995;
/// Slack allowed in the dispersion recursion for discretization.
pub const RECURSION_SLACK: f64 = 2e-3;

/// Tangent chart at `x`: frame, block radii and oblique projections.
#[derive(Clone, Debug)]
pub struct ChartFrame {
    pub base: TorusPoint,
    pub basis_e: DMatrix<f64>,
    pub basis_f: DMatrix<f64>,
    pub radius_e: f64,
    pub radius_f: f64,
    /// Inverse of `[B_E | B_F]`; its rows give the oblique coordinates.
    inverse: DMatrix<f64>,
    pub gamma: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChartSummary {
    pub base: TorusPoint,
    pub dim_e: usize,
    pub dim_f: usize,
    pub radius_e: f64,
    pub radius_f: f64,
    pub gamma: f64,
}

impl ChartFrame {
    pub fn new(base: TorusPoint, frame: Frame, radius_e: f64, radius_f: f64) -> Result<ChartFrame> {
        if !(radius_e > 0.0 && radius_f > 0.0) {
            return Err(DomlabError::Config(format!("chart radii must be positive ({radius_e}, {radius_f})")));
        }
        if frame.dim() != base.dim() {
            return Err(DomlabError::Config("frame and base point dimensions differ".into()));
        }
        let inverse = frame
            .combined()
            .try_inverse()
            .ok_or_else(|| DomlabError::DegenerateFrame("E and F are not complementary".into()))?;
        let de = frame.basis_e.ncols();
        let pi_e = &frame.basis_e * inverse.rows(0, de);
        let pi_f = &frame.basis_f * inverse.rows(de, frame.basis_f.ncols());
        let gamma = operator_norm(&pi_e).max(operator_norm(&pi_f));
        Ok(ChartFrame { base, basis_e: frame.basis_e, basis_f: frame.basis_f, radius_e, radius_f, inverse, gamma })
    }

    /// Chart with the splitting frame at `x`.
    pub fn from_splitting(splitting: &SplittingField, x: &TorusPoint, radius: f64) -> Result<ChartFrame> {
        ChartFrame::new(*x, splitting.frame_at(x)?, radius, radius)
    }

    pub fn dim(&self) -> usize {
        self.basis_e.nrows()
    }

    pub fn dim_e(&self) -> usize {
        self.basis_e.ncols()
    }

    pub fn dim_f(&self) -> usize {
        self.basis_f.ncols()
    }

    pub fn frame(&self) -> Frame {
        Frame { basis_e: self.basis_e.clone(), basis_f: self.basis_f.clone() }
    }

    pub fn with_radii(&self, radius_e: f64, radius_f: f64) -> ChartFrame {
        ChartFrame { radius_e, radius_f, ..self.clone() }
    }

    /// Oblique coordinates `(a, b)` of an ambient vector.
    pub fn coords(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let de = self.dim_e();
        let c: Vec<f64> = (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.inverse[(i, j)] * w[j]).sum())
            .collect();
        (c[..de].to_vec(), c[de..].to_vec())
    }

    pub fn ambient(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                a.iter().enumerate().map(|(k, v)| self.basis_e[(i, k)] * v).sum::<f64>()
                    + b.iter().enumerate().map(|(k, v)| self.basis_f[(i, k)] * v).sum::<f64>()
            })
            .collect()
    }

    pub fn pi_e(&self) -> DMatrix<f64> {
        &self.basis_e * self.inverse.rows(0, self.dim_e())
    }

    pub fn pi_f(&self) -> DMatrix<f64> {
        &self.basis_f * self.inverse.rows(self.dim_e(), self.dim_f())
    }

    /// `max(‖π_E + π_F − I‖, ‖π_E π_F‖)`.
    pub fn projection_residual(&self) -> f64 {
        let (pe, pf) = (self.pi_e(), self.pi_f());
        let id = DMatrix::identity(self.dim(), self.dim());
        operator_norm(&(&pe + &pf - id)).max(operator_norm(&(&pe * &pf)))
    }

    pub fn summary(&self) -> ChartSummary {
        ChartSummary {
            base: self.base,
            dim_e: self.dim_e(),
            dim_f: self.dim_f(),
            radius_e: self.radius_e,
            radius_f: self.radius_f,
            gamma: self.gamma,
        }
    }
}

/// `G` on an `m^d` tensor grid, `m` odd so that `b = 0` is a node.
#[derive(Clone, Debug)]
pub struct HadamardGraph {
    pub chart: ChartFrame,
    nodes: usize,
    values: Vec<f64>,
    /// False at nodes filled by extension rather than by the defining formulas.
    valid: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersionValue {
    pub value: f64,
    /// Chart coordinates `(a…, b…)` of the node where the maximum is attained.
    pub attained_at: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphSummary {
    pub chart: ChartSummary,
    pub nodes_per_axis: usize,
    pub dispersion: DispersionValue,
    pub valid_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "recipe", rename_all = "snake_case")]
pub enum GraphRecipe {
    Zero,
    /// `G_i = s·b_i` for `i < min(dim E, dim F)`.
    Linear { slope: f64 },
    /// `G_1 = a·a_1·b_1`.
    Bilinear { a: f64 },
    /// Six seeded low-frequency modes `cos(π q·ã + φ)·sin(π p·b̃)` with
    /// `ã = a/r_E`, `b̃ = b/r_F`.
    RandomSmooth { seed: u64, amplitude: f64 },
}

fn axis_value(i: usize, m: usize, r: f64) -> f64 {
    r * (2.0 * i as f64 - (m - 1) as f64) / (m - 1) as f64
}

impl HadamardGraph {
    fn from_fn(chart: ChartFrame, nodes: usize, f: impl Fn(&[f64], &[f64]) -> Vec<f64> + Sync) -> Result<HadamardGraph> {
        if nodes < MIN_NODES || nodes % 2 == 0 {
            return Err(DomlabError::Config(format!("grid needs an odd node count >= {MIN_NODES}, got {nodes}")));
        }
        let de = chart.dim_e();
        let total = nodes.pow(chart.dim() as u32);
        let g = HadamardGraph { chart, nodes, values: Vec::new(), valid: vec![true; total] };
        let values: Vec<f64> = (0..total)
            .into_par_iter()
            .flat_map_iter(|idx| {
                let (a, b) = g.node_coords(idx);
                let v = f(&a, &b);
                debug_assert_eq!(v.len(), de);
                v
            })
            .collect();
        Ok(HadamardGraph { values, ..g })
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.valid.len()
    }

    pub fn dim_e(&self) -> usize {
        self.chart.dim_e()
    }

    pub fn dim_f(&self) -> usize {
        self.chart.dim_f()
    }

    fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let d = self.chart.dim();
        let mut out = vec![0; d];
        for axis in (0..d).rev() {
            out[axis] = idx % self.nodes;
            idx /= self.nodes;
        }
        out
    }

    fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().fold(0, |acc, i| acc * self.nodes + i)
    }

    fn radius(&self, axis: usize) -> f64 {
        if axis < self.dim_e() {
            self.chart.radius_e
        } else {
            self.chart.radius_f
        }
    }

    pub fn node_coords(&self, idx: usize) -> (Vec<f64>, Vec<f64>) {
        let mi = self.multi_index(idx);
        let de = self.dim_e();
        let c: Vec<f64> = mi.iter().enumerate().map(|(ax, i)| axis_value(*i, self.nodes, self.radius(ax))).collect();
        (c[..de].to_vec(), c[de..].to_vec())
    }

    pub fn node_value(&self, idx: usize) -> &[f64] {
        let de = self.dim_e();
        &self.values[idx * de..(idx + 1) * de]
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid[idx]
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid.iter().filter(|v| **v).count() as f64 / self.valid.len() as f64
    }

    /// True when `b = 0` at this node.
    fn on_zero_section(&self, mi: &[usize]) -> bool {
        let c = (self.nodes - 1) / 2;
        mi[self.dim_e()..].iter().all(|i| *i == c)
    }

    /// Containing cell and weights along each axis (clamped to the block).
    fn locate(&self, a: &[f64], b: &[f64]) -> Vec<(usize, f64)> {
        let m = self.nodes;
        a.iter()
            .chain(b)
            .enumerate()
            .map(|(ax, t)| {
                let r = self.radius(ax);
                let s = ((t + r) / (2.0 * r) * (m - 1) as f64).clamp(0.0, (m - 1) as f64);
                let i0 = (s.floor() as usize).min(m - 2);
                (i0, s - i0 as f64)
            })
            .collect()
    }

    /// Multilinear interpolation of `G` (clamped to the block).
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let cell = self.locate(a, b);
        let d = cell.len();
        let de = self.dim_e();
        let mut out = vec![0.0; de];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut mi = Vec::with_capacity(d);
            for (ax, (i0, t)) in cell.iter().enumerate() {
                let up = (corner >> ax) & 1 == 1;
                w *= if up { *t } else { 1.0 - t };
                mi.push(i0 + usize::from(up));
            }
            if w != 0.0 {
                let v = self.node_value(self.flat_index(&mi));
                out.iter_mut().zip(v).for_each(|(o, x)| *o += w * x);
            }
        }
        out
    }

    /// True when every corner of the cell containing `(a, b)` is valid.
    pub fn valid_at(&self, a: &[f64], b: &[f64]) -> bool {
        let cell = self.locate(a, b);
        let d = cell.len();
        (0..(1usize << d)).all(|corner| {
            let mi: Vec<usize> =
                cell.iter().enumerate().map(|(ax, (i0, _))| i0 + ((corner >> ax) & 1)).collect();
            self.valid[self.flat_index(&mi)]
        })
    }

    pub fn contains(&self, a: &[f64], b: &[f64]) -> bool {
        let tol = 1e-12;
        a.iter().all(|v| v.abs() <= self.chart.radius_e * (1.0 + tol))
            && b.iter().all(|v| v.abs() <= self.chart.radius_f * (1.0 + tol))
    }

    /// `Φ(a, b) = B_E (a + G(a, b)) + B_F b` as an ambient vector.
    pub fn phi(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let g = self.eval(a, b);
        let e: Vec<f64> = a.iter().zip(&g).map(|(x, y)| x + y).collect();
        self.chart.ambient(&e, b)
    }

    /// Finite-difference `∂G/∂b` at a node (`dim E × dim F`); central inside,
    /// one-sided at the boundary or next to extension nodes.
    pub fn derivative_b(&self, idx: usize) -> Option<DMatrix<f64>> {
        let (de, df) = (self.dim_e(), self.dim_f());
        let mi = self.multi_index(idx);
        let mut out = DMatrix::zeros(de, df);
        for j in 0..df {
            let ax = de + j;
            let neighbour = |step: isize| -> Option<usize> {
                let k = mi[ax] as isize + step;
                if k < 0 || k >= self.nodes as isize {
                    return None;
                }
                let mut m2 = mi.clone();
                m2[ax] = k as usize;
                let f = self.flat_index(&m2);
                self.valid[f].then_some(f)
            };
            let r = self.radius(ax);
            let h = 2.0 * r / (self.nodes - 1) as f64;
            let (lo, hi, span) = match (neighbour(-1), neighbour(1)) {
                (Some(l), Some(u)) => (l, u, 2.0 * h),
                (None, Some(u)) => (idx, u, h),
                (Some(l), None) => (l, idx, h),
                (None, None) => return None,
            };
            let (vl, vh) = (self.node_value(lo), self.node_value(hi));
            for i in 0..de {
                out[(i, j)] = (vh[i] - vl[i]) / span;
            }
        }
        Some(out)
    }

    pub fn dispersion(&self) -> DispersionValue {
        let best = (0..self.node_count())
            .into_par_iter()
            .filter(|&i| self.valid[i])
            .filter_map(|i| self.derivative_b(i).map(|d| (operator_norm(&d), i)))
            .collect::<Vec<_>>()
            .into_iter()
            .fold(None::<(f64, usize)>, |acc, (v, i)| match acc {
                Some((bv, _)) if bv >= v => acc,
                _ => Some((v, i)),
            });
        match best {
            Some((value, i)) => {
                let (a, b) = self.node_coords(i);
                DispersionValue { value, attained_at: [a, b].concat() }
            }
            None => DispersionValue { value: 0.0, attained_at: vec![0.0; self.chart.dim()] },
        }
    }

    /// Checks `G(a, 0) = 0`, `|G| ≤ r_E` and injectivity of `Φ` along each
    /// `b`-fibre; returns a witness on failure.
    pub fn validate(&self) -> Result<()> {
        let de = self.dim_e();
        for idx in 0..self.node_count() {
            let mi = self.multi_index(idx);
            let v = self.node_value(idx);
            if self.on_zero_section(&mi) && v.iter().any(|x| *x != 0.0) {
                let (a, _) = self.node_coords(idx);
                return Err(DomlabError::InvalidGraph(format!("G(a, 0) = {v:?} != 0 at a = {a:?}")));
            }
            if self.valid[idx] && v.iter().any(|x| !(x.abs() <= self.chart.radius_e * (1.0 + 1e-9))) {
                let (a, b) = self.node_coords(idx);
                return Err(DomlabError::InvalidGraph(format!(
                    "|G| exceeds r_E = {:e} at (a, b) = ({a:?}, {b:?}): {v:?}",
                    self.chart.radius_e
                )));
            }
        }
        let fibres = self.nodes.pow(self.dim_f() as u32);
        let per_fibre = self.nodes.pow(de as u32);
        for fb in 0..fibres {
            let images: Vec<(usize, Vec<f64>)> = (0..per_fibre)
                .map(|ea| {
                    let idx = ea * fibres + fb;
                    let (a, _) = self.node_coords(idx);
                    let v = self.node_value(idx);
                    (idx, a.iter().zip(v).map(|(x, y)| x + y).collect())
                })
                .collect();
            if de == 1 {
                let diffs: Vec<f64> = images.windows(2).map(|w| w[1].1[0] - w[0].1[0]).collect();
                let up = diffs.iter().all(|d| *d > 0.0);
                let down = diffs.iter().all(|d| *d < 0.0);
                if !(up || down) {
                    let (_, b) = self.node_coords(images[0].0);
                    return Err(DomlabError::InvalidGraph(format!("Φ(·, b) not injective along the fibre b = {b:?}")));
                }
            } else {
                let sep = 1e-12 * self.chart.radius_e;
                for i in 0..images.len() {
                    for j in i + 1..images.len() {
                        let d = images[i].1.iter().zip(&images[j].1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                        if d <= sep {
                            let (a1, b) = self.node_coords(images[i].0);
                            let (a2, _) = self.node_coords(images[j].0);
                            return Err(DomlabError::InvalidGraph(format!(
                                "Φ(·, {b:?}) identifies a = {a1:?} and a = {a2:?}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `G` multiplied by `factor` (dispersion scales linearly).
    pub fn scaled(&self, factor: f64) -> HadamardGraph {
        HadamardGraph { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            chart: self.chart.summary(),
            nodes_per_axis: self.nodes,
            dispersion: self.dispersion(),
            valid_fraction: self.valid_fraction(),
        }
    }

    /// Columns `a_0…, b_0…, g_0…, valid`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| DomlabError::Resource(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let (de, df) = (self.dim_e(), self.dim_f());
        let mut header: Vec<String> = (0..de).map(|i| format!("a_{i}")).collect();
        header.extend((0..df).map(|i| format!("b_{i}")));
        header.extend((0..de).map(|i| format!("g_{i}")));
        header.push("valid".into());
        w.write_record(&header).map_err(io)?;
        for idx in 0..self.node_count() {
            let (a, b) = self.node_coords(idx);
            let mut row: Vec<String> =
                a.iter().chain(&b).chain(self.node_value(idx)).map(|v| format!("{v:.17e}")).collect();
            row.push(u8::from(self.valid[idx]).to_string());
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| DomlabError::Resource(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

/// Builds and validates a graph from a recipe.
pub fn make_graph(chart: ChartFrame, recipe: GraphRecipe, nodes: usize) -> Result<HadamardGraph> {
    let (de, df) = (chart.dim_e(), chart.dim_f());
    let (re, rf) = (chart.radius_e, chart.radius_f);
    let graph = match recipe {
        GraphRecipe::Zero => HadamardGraph::from_fn(chart, nodes, |_, _| vec![0.0; de])?,
        GraphRecipe::Linear { slope } => HadamardGraph::from_fn(chart, nodes, |_, b| {
            (0..de).map(|i| if i < df { slope * b[i] } else { 0.0 }).collect()
        })?,
        GraphRecipe::Bilinear { a: coef } => HadamardGraph::from_fn(chart, nodes, |a, b| {
            let mut g = vec![0.0; de];
            g[0] = coef * a[0] * b[0];
            g
        })?,
        GraphRecipe::RandomSmooth { seed, amplitude } => {
            let mut rng = indexed_rng(seed, "graph_recipe", 0);
            let modes: Vec<(Vec<f64>, Vec<f64>, f64, Vec<f64>)> = (0..6)
                .map(|_| {
                    let q: Vec<f64> = (0..de).map(|_| rng.random_range(0..=2) as f64).collect();
                    let mut p: Vec<f64> = (0..df).map(|_| rng.random_range(-2..=2) as f64).collect();
                    if p.iter().all(|v| *v == 0.0) {
                        p[0] = 1.0;
                    }
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    let c: Vec<f64> = (0..de).map(|_| rng.random_range(-1.0..1.0)).collect();
                    (q, p, phase, c)
                })
                .collect();
            HadamardGraph::from_fn(chart, nodes, move |a, b| {
                let pi = std::f64::consts::PI;
                let mut g = vec![0.0; de];
                for (q, p, phase, c) in &modes {
                    let qa: f64 = q.iter().zip(a).map(|(k, v)| k * v / re).sum();
                    let pb: f64 = p.iter().zip(b).map(|(k, v)| k * v / rf).sum();
                    let s = (pi * qa + phase).cos() * (pi * pb).sin();
                    g.iter_mut().zip(c).for_each(|(gi, ci)| *gi += amplitude * rf * ci * s);
                }
                g
            })?
        }
    };
    graph.validate()?;
    Ok(graph)
}

/// Rescales a graph so its dispersion equals `target`.
pub fn scale_to_dispersion(graph: &HadamardGraph, target: f64) -> Result<HadamardGraph> {
    let d = graph.dispersion().value;
    if d == 0.0 {
        return if target == 0.0 { Ok(graph.clone()) } else { Err(DomlabError::InvalidGraph("cannot rescale a graph with zero dispersion".into())) };
    }
    let out = graph.scaled(target / d);
    out.validate()?;
    Ok(out)
}

pub fn dispersion(graph: &HadamardGraph) -> DispersionValue {
    graph.dispersion()
}

/// Orthonormal basis of `T_y L(y) = (Id_F + ∂G/∂v₂) F_x` at the node
/// nearest to `(a, b)`.
pub fn tangent_leaf(graph: &HadamardGraph, a: &[f64], b: &[f64]) -> Result<DMatrix<f64>> {
    let cell = graph.locate(a, b);
    let mi: Vec<usize> = cell.iter().map(|(i0, t)| if *t < 0.5 { *i0 } else { i0 + 1 }).collect();
    let idx = graph.flat_index(&mi);
    let dg = graph
        .derivative_b(idx)
        .ok_or_else(|| DomlabError::InvalidGraph("no valid neighbours for a derivative".into()))?;
    Ok(orthonormalize(&(&graph.chart.basis_f + &graph.chart.basis_e * dg)))
}

/// Upper bound on `dist(T_y L(y), F_x)` for a graph of dispersion `disp`.
pub fn leaf_tilt_bound(disp: f64) -> f64 {
    if disp < 1.0 {
        (disp / (1.0 - disp)).min(1.0)
    } else {
        1.0
    }
}

/// Largest dispersion guaranteeing `dist(T L, F) < eps` by [`leaf_tilt_bound`].
pub fn dispersion_for_tilt(eps: f64) -> f64 {
    eps / (1.0 + eps)
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafVolume {
    pub volume: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Length (`dim F = 1`) or area (`dim F = 2`) of the leaf through `a`,
/// against `(2δ)^{dim F} (1 + disp)^{dim F}` with `δ = r_F`.
pub fn leaf_volume(graph: &HadamardGraph, a: &[f64]) -> Result<LeafVolume> {
    let df = graph.dim_f();
    let m = graph.nodes;
    let rf = graph.chart.radius_f;
    let bs: Vec<f64> = (0..m).map(|i| axis_value(i, m, rf)).collect();
    let volume = match df {
        1 => {
            let pts: Vec<Vec<f64>> = bs.iter().map(|b| graph.phi(a, &[*b])).collect();
            pts.windows(2)
                .map(|w| w[0].iter().zip(&w[1]).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt())
                .sum()
        }
        2 => {
            let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
            let h = bs[1] - bs[0];
            let mut total = 0.0;
            for i in 0..m - 1 {
                for j in 0..m - 1 {
                    let g = |di: usize, dj: usize| graph.eval(a, &[bs[i + di], bs[j + dj]]);
                    let (g00, g10, g01, g11) = (g(0, 0), g(1, 0), g(0, 1), g(1, 1));
                    for s in gauss {
                        for t in gauss {
                            let d1: Vec<f64> = (0..graph.dim_e())
                                .map(|k| ((1.0 - t) * (g10[k] - g00[k]) + t * (g11[k] - g01[k])) / h)
                                .collect();
                            let d2: Vec<f64> = (0..graph.dim_e())
                                .map(|k| ((1.0 - s) * (g01[k] - g00[k]) + s * (g11[k] - g10[k])) / h)
                                .collect();
                            let c1 = graph.chart.ambient(&d1, &[1.0, 0.0]);
                            let c2 = graph.chart.ambient(&d2, &[0.0, 1.0]);
                            let j = DMatrix::from_fn(graph.chart.dim(), 2, |r, c| if c == 0 { c1[r] } else { c2[r] });
                            total += 0.25 * h * h * (j.transpose() * &j).determinant().max(0.0).sqrt();
                        }
                    }
                }
            }
            total
        }
        _ => return Err(DomlabError::Config(format!("leaf volume needs dim F in {{1,2}}, got {df}"))),
    };
    let disp = graph.dispersion().value;
    let bound = (2.0 * rf * (1.0 + disp)).powi(df as i32);
    Ok(LeafVolume { volume, bound, holds: volume <= bound * (1.0 + 1e-12) })
}

/// Resampling of a graph through a local map `L` into a target chart.
struct Engine<'a> {
    src: &'a HadamardGraph,
    local: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    target: &'a ChartFrame,
    tol: f64,
}

impl Engine<'_> {
    /// Target coordinates of `L(Φ(a, b))`.
    fn image(&self, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.target.coords(&(self.local)(&self.src.phi(a, b)))
    }

    fn rf(&self) -> f64 {
        self.src.chart.radius_f
    }

    /// Leaf parameter `b` where `L(leaf(a))` meets the target `E`, and the
    /// resulting `u₁`.
    fn intersect(&self, a: &[f64], guess: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let b = self.solve_b(a, &vec![0.0; self.src.dim_f()], guess)?;
        let (alpha, _) = self.image(a, &b);
        Some((b, alpha))
    }

    /// `b` with `π_F L(Φ(a, b)) = u2`.
    fn solve_b(&self, a: &[f64], u2: &[f64], guess: &[f64]) -> Option<Vec<f64>> {
        let rf = self.rf();
        if self.src.dim_f() == 1 {
            bracketed_root(|b| Some(self.image(a, &[b]).1[0] - u2[0]), -rf, rf, guess[0], self.tol).map(|b| vec![b])
        } else {
            let radius = vec![rf; self.src.dim_f()];
            box_newton(
                |b| Some(self.image(a, b).1.iter().zip(u2).map(|(x, y)| x - y).collect()),
                &radius,
                guess,
                self.tol,
            )
        }
    }

    fn u1(&self, a: &[f64]) -> Option<Vec<f64>> {
        self.intersect(a, &vec![0.0; self.src.dim_f()]).map(|(_, u)| u)
    }

    /// `a` with `u₁(a) = target`, seeded from the tabulated source nodes.
    fn solve_a(&self, target: &[f64], table: &[(Vec<f64>, Vec<f64>)]) -> Option<Vec<f64>> {
        let re = self.src.chart.radius_e;
        if self.src.dim_e() == 1 {
            let t = target[0];
            let k = table.windows(2).position(|w| (w[0].1[0] - t) * (w[1].1[0] - t) <= 0.0)?;
            let (lo, hi) = (table[k].0[0], table[k + 1].0[0]);
            let (ulo, uhi) = (table[k].1[0], table[k + 1].1[0]);
            let guess = if uhi != ulo { lo + (t - ulo) / (uhi - ulo) * (hi - lo) } else { lo };
            bracketed_root(|a| self.u1(&[a]).map(|u| u[0] - t), lo, hi, guess, self.tol).map(|a| vec![a])
        } else {
            let nearest = table
                .iter()
                .min_by(|x, y| {
                    let dx: f64 = x.1.iter().zip(target).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                    let dy: f64 = y.1.iter().zip(target).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                    dx.total_cmp(&dy)
                })?;
            box_newton(
                |a| self.u1(a).map(|u| u.iter().zip(target).map(|(x, y)| x - y).collect()),
                &vec![re; self.src.dim_e()],
                &nearest.0,
                self.tol,
            )
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransformDiagnostics {
    pub radius_e: f64,
    pub radius_f: f64,
    pub valid_fraction: f64,
    pub extrapolated_nodes: usize,
    /// Largest `|π_E L(Φ) − u₁|` at nodes with `u₂ = 0`.
    pub zero_section_residual: f64,
}

fn resample(
    src: &HadamardGraph,
    local: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    target: &ChartFrame,
    on_missing: fn(String) -> DomlabError,
) -> Result<(HadamardGraph, TransformDiagnostics)> {
    let scale = src.chart.radius_e.max(src.chart.radius_f);
    let engine = Engine { src, local, target, tol: 1e-13 * scale };
    let (de, df) = (src.dim_e(), src.dim_f());
    let m = src.nodes;
    let e_nodes: Vec<usize> = (0..m.pow(de as u32)).map(|k| k * m.pow(df as u32) + (m.pow(df as u32) - 1) / 2).collect();
    let table: Vec<(Vec<f64>, Vec<f64>)> = e_nodes
        .par_iter()
        .map(|&idx| {
            let (a, _) = src.node_coords(idx);
            let u = engine
                .u1(&a)
                .ok_or_else(|| on_missing(format!("the image of the leaf through a = {a:?} misses the target E")))?;
            Ok((a, u))
        })
        .collect::<Result<_>>()?;
    let re = src.chart.radius_e;
    let on_boundary = |a: &[f64]| a.iter().any(|v| (v.abs() - re).abs() <= 1e-12 * re);
    let inscribed_e = table
        .iter()
        .filter(|(a, _)| on_boundary(a))
        .map(|(_, u)| u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
        .fold(f64::INFINITY, f64::min);
    let b_boundary: Vec<Vec<f64>> = (0..m.pow(df as u32))
        .map(|k| {
            let mut k = k;
            (0..df)
                .map(|_| {
                    let i = k % m;
                    k /= m;
                    axis_value(i, m, src.chart.radius_f)
                })
                .collect::<Vec<f64>>()
        })
        .filter(|b: &Vec<f64>| b.iter().any(|v| (v.abs() - src.chart.radius_f).abs() <= 1e-12 * src.chart.radius_f))
        .collect();
    let inscribed_f = table
        .par_iter()
        .map(|(a, _)| {
            b_boundary
                .iter()
                .map(|b| engine.image(a, b).1.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
                .fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let radius_e = target.radius_e.min(RADIUS_MARGIN * inscribed_e);
    let radius_f = target.radius_f.min(RADIUS_MARGIN * inscribed_f);
    if !(radius_e > 0.0 && radius_f > 0.0) {
        return Err(on_missing(format!("image block is degenerate (r_E = {radius_e:e}, r_F = {radius_f:e})")));
    }
    let out_chart = target.with_radii(radius_e, radius_f);
    let shell = HadamardGraph { chart: out_chart, nodes: m, values: Vec::new(), valid: Vec::new() };

    // Per target E-node: the source a with u₁(a) = node.
    let fibre = m.pow(df as u32);
    let sources: Vec<Option<Vec<f64>>> = (0..m.pow(de as u32))
        .into_par_iter()
        .map(|k| {
            let (u1, _) = shell.node_coords(k * fibre);
            engine.solve_a(&u1, &table)
        })
        .collect();
    if let Some(k) = sources.iter().position(|s| s.is_none()) {
        let (u1, _) = shell.node_coords(k * fibre);
        return Err(on_missing(format!("no leaf reaches u1 = {u1:?}")));
    }
    let center = (m - 1) / 2;
    let solved: Vec<(Option<Vec<f64>>, bool, f64)> = (0..m.pow((de + df) as u32))
        .into_par_iter()
        .map(|idx| {
            let mi = shell.multi_index(idx);
            let (u1, u2) = shell.node_coords(idx);
            let a = sources[idx / fibre].as_ref().expect("checked above");
            let (b_star, _) = engine.intersect(a, &vec![0.0; df]).expect("intersection exists for solved a");
            if mi[de..].iter().all(|i| *i == center) {
                let (alpha, _) = engine.image(a, &b_star);
                let res = alpha.iter().zip(&u1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                return (Some(vec![0.0; de]), src.valid_at(a, &b_star), res);
            }
            match engine.solve_b(a, &u2, &b_star) {
                Some(b) => {
                    let (alpha, _) = engine.image(a, &b);
                    let g: Vec<f64> = alpha.iter().zip(&u1).map(|(x, y)| x - y).collect();
                    (Some(g), src.valid_at(a, &b), 0.0)
                }
                None => (None, false, 0.0),
            }
        })
        .collect();
    let zero_section_residual = solved.iter().map(|s| s.2).fold(0.0, f64::max);
    let mut values = vec![0.0; solved.len() * de];
    let mut valid = vec![false; solved.len()];
    let mut extrapolated = 0;
    for (idx, (g, ok, _)) in solved.iter().enumerate() {
        let v = match g {
            Some(g) => g.clone(),
            None => {
                // Constant extension from the nearest solved node of the same
                // E-fibre (ties go to the lower index).
                extrapolated += 1;
                let mi = shell.multi_index(idx);
                let base = (idx / fibre) * fibre;
                let (_, best) = (0..fibre)
                    .filter(|k| solved[base + k].0.is_some())
                    .map(|k| {
                        let mj = shell.multi_index(base + k);
                        let dist = mi[de..].iter().zip(&mj[de..]).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0);
                        (dist, base + k)
                    })
                    .min()
                    .expect("the zero section is always solved");
                solved[best].0.clone().expect("filtered")
            }
        };
        values[idx * de..(idx + 1) * de].copy_from_slice(&v);
        valid[idx] = *ok;
    }
    let graph = HadamardGraph { values, valid, ..shell };
    graph.validate()?;
    let diagnostics = TransformDiagnostics {
        radius_e,
        radius_f,
        valid_fraction: graph.valid_fraction(),
        extrapolated_nodes: extrapolated,
        zero_section_residual,
    };
    Ok((graph, diagnostics))
}

fn delta_violated(msg: String) -> DomlabError {
    DomlabError::DeltaViolated(msg)
}

fn rebase_violated(msg: String) -> DomlabError {
    DomlabError::RebaseRadius(msg)
}

/// `G₁` at `f(x)`: `u₂ = π_F f(Φ)`, `G₁ = −u₁ + π_E f(Φ)` with `u₁` the
/// intersection of the image leaf with `E_{f(x)}`. The radii of `target`
/// are upper bounds; the output block is the largest box inside the image.
pub fn graph_transform(map: &Diffeo, graph: &HadamardGraph, target: &ChartFrame) -> Result<HadamardGraph> {
    graph_transform_detailed(map, graph, target).map(|(g, _)| g)
}

pub fn graph_transform_detailed(
    map: &Diffeo,
    graph: &HadamardGraph,
    target: &ChartFrame,
) -> Result<(HadamardGraph, TransformDiagnostics)> {
    let disp = graph.dispersion().value;
    if !(disp < 0.5) {
        return Err(DomlabError::InvalidGraph(format!("graph transform needs disp < 1/2, got {disp}")));
    }
    let x = graph.chart.base;
    if map.apply(&x).distance(&target.base) > 1e-12 {
        return Err(DomlabError::Config("target chart is not based at f(x)".into()));
    }
    let local = move |v: &[f64]| map.local_map(&x, v);
    resample(graph, &local, target, delta_violated)
}

/// Re-expresses a graph at `x` as a graph at a nearby `z` with the frame of
/// `splitting` at `z`. The leaves are unchanged.
pub fn rebase_graph(graph: &HadamardGraph, splitting: &SplittingField, z: &TorusPoint) -> Result<HadamardGraph> {
    let x = graph.chart.base;
    if *z == x {
        return Ok(graph.clone());
    }
    let delta = x.displacement_to(z);
    let target = ChartFrame::new(*z, splitting.frame_at(z)?, graph.chart.radius_e, graph.chart.radius_f)?;
    let local = move |v: &[f64]| v.iter().zip(&delta).map(|(a, d)| a - d).collect::<Vec<f64>>();
    resample(graph, &local, &target, rebase_violated).map(|(g, _)| g)
}

/// Formula checks of one transform: independence of `u₁` from the starting
/// `v₂`, the inverse identity for `∂u₂/∂v₂`, and agreement of transformed
/// leaves with direct images.
#[derive(Clone, Debug, Serialize)]
pub struct TransformChecks {
    pub u1_variation: f64,
    pub inverse_identity_residual: f64,
    pub leaf_image_error: f64,
    pub points_compared: usize,
}

pub fn transform_checks(
    map: &Diffeo,
    src: &HadamardGraph,
    out: &HadamardGraph,
) -> Result<TransformChecks> {
    let x = src.chart.base;
    let local = move |v: &[f64]| map.local_map(&x, v);
    let scale = src.chart.radius_e.max(src.chart.radius_f);
    let engine = Engine { src, local: &local, target: &out.chart, tol: 1e-13 * scale };
    let (de, df) = (src.dim_e(), src.dim_f());
    let m = src.nodes;
    let rf = src.chart.radius_f;
    let step = (m - 1) / 8;
    let a_samples: Vec<Vec<f64>> = (0..m.pow(de as u32))
        .filter(|k| {
            let mut k = *k;
            (0..de).all(|_| {
                let ok = (k % m) % step == 0;
                k /= m;
                ok
            })
        })
        .map(|k| src.node_coords(k * m.pow(df as u32)).0)
        .collect();
    let guesses: Vec<Vec<f64>> = [-0.9, -0.4, 0.0, 0.5, 0.9].iter().map(|t| vec![t * rf; df]).collect();
    let mut u1_variation = 0.0f64;
    let mut leaf_image_error = 0.0f64;
    let mut compared = 0;
    for a in &a_samples {
        let roots: Vec<Vec<f64>> = guesses.iter().filter_map(|g| engine.intersect(a, g).map(|(_, u)| u)).collect();
        if roots.len() != guesses.len() {
            return Err(DomlabError::DeltaViolated(format!("leaf through a = {a:?} misses E at f(x)")));
        }
        for r in &roots[1..] {
            u1_variation = u1_variation.max(r.iter().zip(&roots[0]).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
        }
        let u1 = &roots[0];
        if !u1.iter().all(|v| v.abs() <= out.chart.radius_e) {
            continue;
        }
        for t in [-1.0, -0.6, -0.2, 0.3, 0.7, 1.0] {
            let b = vec![t * rf; df];
            if !src.valid_at(a, &b) {
                continue;
            }
            let (alpha, beta) = engine.image(a, &b);
            if !out.contains(u1, &beta) || !out.valid_at(u1, &beta) {
                continue;
            }
            let g = out.eval(u1, &beta);
            let err = alpha.iter().zip(u1).zip(&g).map(|((al, u), gi)| (u + gi - al).abs()).fold(0.0, f64::max);
            leaf_image_error = leaf_image_error.max(err);
            compared += 1;
        }
    }
    // ∂u₂/∂v₂ at the chart centre against df⁻¹ restricted to F_{f(x)}.
    let zero_a = vec![0.0; de];
    let h = 1e-6 * rf;
    let mut du2 = DMatrix::zeros(df, df);
    for j in 0..df {
        let mut bp = vec![0.0; df];
        let mut bm = vec![0.0; df];
        bp[j] = h;
        bm[j] = -h;
        let (_, up) = engine.image(&zero_a, &bp);
        let (_, um) = engine.image(&zero_a, &bm);
        for i in 0..df {
            du2[(i, j)] = (up[i] - um[i]) / (2.0 * h);
        }
    }
    let jinv = map
        .jacobian_at(x.coords())
        .try_inverse()
        .ok_or_else(|| DomlabError::Numerical("singular Jacobian".into()))?;
    let pulled = jinv * &out.chart.basis_f;
    let mut back = DMatrix::zeros(df, df);
    for j in 0..df {
        let col: Vec<f64> = pulled.column(j).iter().copied().collect();
        let (_, beta) = src.chart.coords(&col);
        for i in 0..df {
            back[(i, j)] = beta[i];
        }
    }
    let residual = operator_norm(&(du2 * back - DMatrix::identity(df, df)));
    Ok(TransformChecks {
        u1_variation,
        inverse_identity_residual: residual,
        leaf_image_error,
        points_compared: compared,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationStep {
    pub step: usize,
    pub base: TorusPoint,
    pub disp: DispersionValue,
    pub norm_e: f64,
    pub norm_f_inv: f64,
    /// `‖df^k|_{E_x}‖ · disp G · ‖df^{−k}|_{F_{f^k x}}‖`.
    pub bound_rhs: f64,
    pub holds: bool,
    pub radius_e: f64,
    pub radius_f: f64,
}

#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub graphs: Vec<HadamardGraph>,
    pub steps: Vec<IterationStep>,
    /// First step whose dispersion is below the initial one.
    pub first_below_initial: Option<usize>,
    pub slack: f64,
}

impl IterationTrace {
    pub fn holds(&self) -> bool {
        self.steps.iter().all(|s| s.holds)
    }

    /// Largest `|disp(G_k) − rhs_k|` over the trace.
    pub fn max_equality_gap(&self) -> f64 {
        self.steps.iter().map(|s| (s.disp.value - s.bound_rhs).abs()).fold(0.0, f64::max)
    }

    /// Columns `step, disp, bound_rhs`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| DomlabError::Resource(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "disp", "bound_rhs"]).map_err(io)?;
        for s in &self.steps {
            w.write_record([s.step.to_string(), format!("{:.17e}", s.disp.value), format!("{:.17e}", s.bound_rhs)])
                .map_err(io)?;
        }
        w.flush().map_err(|e| DomlabError::Resource(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

/// `n` successive transforms, re-charting at each `f^k(x)` with the frame of
/// `splitting` and the initial radii as upper bounds, with the dispersion
/// recursion evaluated at every step.
pub fn iterate_transform(
    map: &Diffeo,
    splitting: &SplittingField,
    graph: &HadamardGraph,
    n: usize,
) -> Result<IterationTrace> {
    let x = graph.chart.base;
    let profile = domination_profile(map, splitting, &x, n.max(1))?;
    let disp0 = graph.dispersion();
    let mut graphs = vec![graph.clone()];
    let mut steps = vec![IterationStep {
        step: 0,
        base: x,
        disp: disp0.clone(),
        norm_e: 1.0,
        norm_f_inv: 1.0,
        bound_rhs: disp0.value,
        holds: true,
        radius_e: graph.chart.radius_e,
        radius_f: graph.chart.radius_f,
    }];
    let (max_e, max_f) = (graph.chart.radius_e, graph.chart.radius_f);
    let mut current = graph.clone();
    for k in 1..=n {
        let next_base = map.apply(&current.chart.base);
        let target = ChartFrame::new(next_base, splitting.frame_at(&next_base)?, max_e, max_f)?;
        current = graph_transform(map, &current, &target)?;
        let disp = current.dispersion();
        let (ne, nf) = profile[k - 1];
        let rhs = ne * disp0.value * nf;
        steps.push(IterationStep {
            step: k,
            base: next_base,
            holds: disp.value <= rhs + RECURSION_SLACK,
            disp,
            norm_e: ne,
            norm_f_inv: nf,
            bound_rhs: rhs,
            radius_e: current.chart.radius_e,
            radius_f: current.chart.radius_f,
        });
        graphs.push(current.clone());
    }
    let first_below_initial = steps.iter().skip(1).find(|s| s.disp.value < disp0.value).map(|s| s.step);
    Ok(IterationTrace { graphs, steps, first_below_initial, slack: RECURSION_SLACK })
}

/// Constants the construction only asserts to exist, measured for one map.
#[derive(Clone, Debug, Serialize)]
pub struct MeasuredConstants {
    /// Chart radius from the nonlinearity tolerance.
    pub delta: f64,
    pub nonlinearity_tolerance: f64,
    /// First `n` with `max_x ‖df^n|_E‖‖df^{−n}|_F‖ < 1`.
    pub n0: Option<usize>,
    /// `max_x ‖df|_{E_x}‖·‖df^{−1}|_{F_{f(x)}}‖`.
    pub c1: f64,
    /// `0.49·min(1, 1/max_{n ≤ n0} K_n)` with `K_n` the worst product.
    pub c_prime: f64,
    pub worst_products: Vec<f64>,
}

/// Largest radius `0.1·2^{−j}` with `‖df(x + v) − df(x)‖ ≤ tol` on sampled
/// `x` and `|v|_∞ ≤ radius`.
pub fn measured_chart_radius(map: &Diffeo, tol: f64, seed: u64) -> f64 {
    let d = map.dim();
    let mut rng = indexed_rng(seed, "chart_radius", 0);
    let probes: Vec<(Vec<f64>, Vec<f64>)> = (0..256)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
            (x, dir)
        })
        .collect();
    let mut r = 0.1;
    for _ in 0..40 {
        let worst = probes
            .iter()
            .map(|(x, dir)| {
                let y: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + r * b).collect();
                operator_norm(&(map.jacobian_at(&y) - map.jacobian_at(x)))
            })
            .fold(0.0, f64::max);
        if worst <= tol {
            return r;
        }
        r *= 0.5;
    }
    r
}

pub fn measure_constants(
    map: &Diffeo,
    splitting: &SplittingField,
    points: &[TorusPoint],
    n_max: usize,
    nonlinearity_tolerance: f64,
) -> Result<MeasuredConstants> {
    let profiles: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| domination_profile(map, splitting, x, n_max).map(|p| p.iter().map(|(e, f)| e * f).collect()))
        .collect::<Result<_>>()?;
    let worst: Vec<f64> =
        (0..n_max).map(|i| profiles.iter().map(|p| p[i]).fold(0.0, f64::max)).collect();
    let n0 = worst.iter().position(|k| *k < 1.0).map(|i| i + 1);
    let upto = n0.unwrap_or(n_max);
    let kmax = worst[..upto].iter().fold(1.0_f64, |a, b| a.max(*b));
    Ok(MeasuredConstants {
        delta: measured_chart_radius(map, nonlinearity_tolerance, 0),
        nonlinearity_tolerance,
        n0,
        c1: worst.first().copied().unwrap_or(f64::NAN),
        c_prime: 0.49 * (1.0 / kmax).min(1.0),
        worst_products: worst,
    })
}

/// Largest `r = δ·2^{−j}` such that re-basing `graph` to every probe point at
/// distance `r` succeeds and keeps `disp(G′) < c`.
pub fn measure_rebase_radius(graph: &HadamardGraph, splitting: &SplittingField, c: f64) -> Result<f64> {
    let d = graph.chart.dim();
    let x = graph.chart.base;
    let mut r = graph.chart.radius_e.min(graph.chart.radius_f);
    for _ in 0..30 {
        let ok = (0..d).flat_map(|ax| [-1.0, 1.0].map(move |s| (ax, s))).all(|(ax, s)| {
            let mut v = vec![0.0; d];
            v[ax] = s * r;
            let z = x.translate(&v);
            matches!(rebase_graph(graph, splitting, &z), Ok(g) if g.dispersion().value < c)
        });
        if ok {
            return Ok(r);
        }
        r *= 0.5;
    }
    Err(DomlabError::RebaseRadius("no re-basing radius keeps the dispersion below c".into()))
}

#[derive(Clone, Debug, Serialize)]
pub struct JacobianRatioReport {
    pub eps: f64,
    /// Largest graph dispersion for which sampled tilts keep the ratio
    /// within `e^{±eps}`.
    pub dispersion_threshold: f64,
    /// First step whose graph dispersion is at or below the threshold.
    pub n0: Option<usize>,
    /// Per step, the largest `|log ratio|` over sampled leaf points.
    pub max_abs_log_ratio: Vec<f64>,
    pub points: usize,
    pub holds: bool,
}

/// `|det df|_{T L}| / |det df|_F|` for `T L = (B_F + B_E T)`, `‖T‖ = t`.
fn tilted_ratio(map: &Diffeo, splitting: &SplittingField, y: &TorusPoint, tilt: &DMatrix<f64>) -> Result<f64> {
    let frame = splitting.frame_at(y)?;
    let j = map.jacobian_at(y.coords());
    let l = orthonormalize(&(&frame.basis_f + &frame.basis_e * tilt));
    let vol = |m: &DMatrix<f64>| crate::numeric::gram_volume(&(&j * m));
    Ok(vol(&l) / vol(&frame.basis_f))
}

/// Largest tilt norm `2^{−j}` such that random tilts of that norm at sampled
/// points keep the one-step ratio within `e^{±eps}`.
pub fn ratio_tilt_threshold(map: &Diffeo, splitting: &SplittingField, eps: f64, seed: u64) -> Result<f64> {
    let (de, df, d) = (splitting.dim_e(), splitting.dim_f(), map.dim());
    let mut rng = indexed_rng(seed, "ratio_tilt", 0);
    let probes: Vec<(TorusPoint, DMatrix<f64>)> = (0..64)
        .map(|_| {
            let x = TorusPoint::new(&(0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
            let t = DMatrix::from_fn(de, df, |_, _| rng.random_range(-1.0..=1.0));
            let n = operator_norm(&t).max(1e-300);
            (x, t / n)
        })
        .collect();
    let mut t = 0.5;
    for _ in 0..40 {
        let ok = probes.iter().try_fold(true, |acc, (x, dir)| {
            tilted_ratio(map, splitting, x, &(dir * t)).map(|r| acc && r.ln().abs() <= eps)
        })?;
        if ok {
            return Ok(t);
        }
        t *= 0.5;
    }
    Ok(0.0)
}

/// Pushes the leaf tangents of the initial graph along the orbits of sampled
/// leaf points and compares `|det df|_{T f^k L}|` with `|det df|_F|` at each
/// step. The bound is checked from the first step whose graph dispersion in
/// `trace` is below the measured threshold.
pub fn jacobian_ratio_check(
    map: &Diffeo,
    splitting: &SplittingField,
    trace: &IterationTrace,
    eps: f64,
) -> Result<JacobianRatioReport> {
    let g = &trace.graphs[0];
    let n = trace.steps.len() - 1;
    let threshold = ratio_tilt_threshold(map, splitting, eps, 0)?;
    let n0 = trace.steps.iter().find(|s| s.disp.value <= threshold).map(|s| s.step);
    let m = g.nodes;
    let stride = ((m - 1) / 4).max(1);
    let samples: Vec<usize> = (0..g.node_count())
        .filter(|&i| g.is_valid(i) && g.multi_index(i).iter().all(|k| k % stride == 0))
        .collect();
    let per_point: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|&idx| {
            let (a, b) = g.node_coords(idx);
            let mut y = g.chart.base.translate(&g.phi(&a, &b));
            let mut t = tangent_leaf(g, &a, &b)?;
            let mut logs = Vec::with_capacity(n + 1);
            for _ in 0..=n {
                let frame = splitting.frame_at(&y)?;
                let j = map.jacobian_at(y.coords());
                let vol = |mm: &DMatrix<f64>| crate::numeric::gram_volume(&(&j * mm));
                logs.push((vol(&t) / vol(&frame.basis_f)).ln());
                t = orthonormalize(&(&j * &t));
                y = map.apply(&y);
            }
            Ok(logs)
        })
        .collect::<Result<_>>()?;
    let max_abs: Vec<f64> =
        (0..=n).map(|k| per_point.iter().map(|l| l[k].abs()).fold(0.0, f64::max)).collect();
    let holds = match n0 {
        Some(k0) => max_abs[k0..].iter().all(|v| *v <= eps),
        None => true,
    };
    Ok(JacobianRatioReport {
        eps,
        dispersion_threshold: threshold,
        n0,
        max_abs_log_ratio: max_abs,
        points: samples.len(),
        holds,
    })
}

/// Subspace distance between the tangent of the leaf and `F` at the base.
pub fn leaf_tilt(graph: &HadamardGraph, a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(subspace_distance(&tangent_leaf(graph, a, b)?, &orthonormalize(&graph.chart.basis_f)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cat_chart(r: f64) -> ChartFrame {
        ChartFrame::from_splitting(&SplittingField::cat(), &TorusPoint::new(&[0.3, 0.6]), r).unwrap()
    }

    #[test]
    fn recipes_have_expected_dispersion() {
        let z = make_graph(cat_chart(0.1), GraphRecipe::Zero, 33).unwrap();
        assert_eq!(z.dispersion().value, 0.0);
        let l = make_graph(cat_chart(0.1), GraphRecipe::Linear { slope: 0.3 }, 33).unwrap();
        assert_abs_diff_eq!(l.dispersion().value, 0.3, epsilon = 1e-14);
        let b = make_graph(cat_chart(0.1), GraphRecipe::Bilinear { a: 2.0 }, 33).unwrap();
        assert_abs_diff_eq!(b.dispersion().value, 0.2, epsilon = 1e-14);
    }

    #[test]
    fn projections_are_complementary() {
        assert!(cat_chart(0.1).projection_residual() < 1e-12);
    }

    #[test]
    fn cat_transform_contracts_slope() {
        let g = make_graph(cat_chart(0.1), GraphRecipe::Linear { slope: 0.3 }, 33).unwrap();
        let fx = Diffeo::Cat.apply(&g.chart.base);
        let target = ChartFrame::from_splitting(&SplittingField::cat(), &fx, 0.1).unwrap();
        let g1 = graph_transform(&Diffeo::Cat, &g, &target).unwrap();
        let ratio = (3.0 - 5f64.sqrt()) / (3.0 + 5f64.sqrt());
        assert_abs_diff_eq!(g1.dispersion().value, 0.3 * ratio, epsilon = 1e-10);
    }

    #[test]
    fn leaf_length_of_linear_graph() {
        let z = make_graph(cat_chart(0.1), GraphRecipe::Zero, 33).unwrap();
        assert_abs_diff_eq!(leaf_volume(&z, &[0.0]).unwrap().volume, 0.2, epsilon = 1e-14);
        let l = make_graph(cat_chart(0.1), GraphRecipe::Linear { slope: 0.3 }, 33).unwrap();
        assert_abs_diff_eq!(leaf_volume(&l, &[0.05]).unwrap().volume, 0.2 * 1.09f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rebase_to_same_point_is_identity() {
        let g = make_graph(cat_chart(0.1), GraphRecipe::Bilinear { a: 1.0 }, 33).unwrap();
        let same = rebase_graph(&g, &SplittingField::cat(), &g.chart.base).unwrap();
        assert_eq!(same.values, g.values);
    }
}
