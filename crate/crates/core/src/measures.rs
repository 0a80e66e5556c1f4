//! Empirical measures, the weak* metric `dist*`, approximate basins
//! `C_n(ε)` and SRB-like scoring at finite resolution.
//!
//! ```text
//! dist*(μ₁, μ₂) = |∫ψ dμ₁ − ∫ψ dμ₂| + Σ_{i=1}^{N} 2^{−i} |∫φ_i dμ₁ − ∫φ_i dμ₂|
//! ```
//!
//! with `φ_i(x) = (1 + cos(2π k_i·x + θ_i)) / 2`. Every measure is reduced to
//! a [`Signature`] (its `ψ`-integral and the `N` test integrals) and
//! distances are computed between signatures.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::PsiEvaluator;
use crate::dynamics::{Diffeo, TorusPoint};
use crate::error::{DomlabError, Result};
use crate::numeric::pairwise_sum;

pub const DEFAULT_TRUNCATION: usize = 16;

/// Finitely supported probability measure. Atoms are kept sorted by
/// coordinates; coincident atoms are merged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    atoms: Vec<(TorusPoint, f64)>,
}

impl EmpiricalMeasure {
    /// Normalizes the weights, drops zero weights and merges duplicates.
    pub fn from_atoms(atoms: Vec<(TorusPoint, f64)>) -> Result<EmpiricalMeasure> {
        if atoms.iter().any(|(p, w)| !(w.is_finite() && *w >= 0.0) || !p.is_finite()) {
            return Err(DomlabError::Config("atom weights must be finite and nonnegative".into()));
        }
        let total = pairwise_sum(&atoms.iter().map(|a| a.1).collect::<Vec<_>>());
        if !(total > 0.0) {
            return Err(DomlabError::Config("measure has no mass".into()));
        }
        let mut atoms: Vec<(TorusPoint, f64)> =
            atoms.into_iter().filter(|a| a.1 > 0.0).map(|(p, w)| (p, w / total)).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(TorusPoint, f64)> = Vec::with_capacity(atoms.len());
        for (p, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += w,
                _ => merged.push((p, w)),
            }
        }
        Ok(EmpiricalMeasure { atoms: merged })
    }

    /// Uniform measure on `points`, each occurrence counted once.
    pub fn uniform(points: &[TorusPoint]) -> Result<EmpiricalMeasure> {
        if points.is_empty() {
            return Err(DomlabError::Config("empirical measure needs at least one point".into()));
        }
        let mut sorted = points.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len() as f64;
        let mut atoms: Vec<(TorusPoint, f64)> = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|p| **p == sorted[i]).count();
            atoms.push((sorted[i], j as f64 / n));
            i += j;
        }
        Ok(EmpiricalMeasure { atoms })
    }

    pub fn dirac(x: TorusPoint) -> EmpiricalMeasure {
        EmpiricalMeasure { atoms: vec![(x, 1.0)] }
    }

    pub fn atoms(&self) -> &[(TorusPoint, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].0.dim()
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.atoms.iter().map(|a| a.1).collect::<Vec<_>>())
    }

    /// `t·self + (1 − t)·other`.
    pub fn mix(&self, other: &EmpiricalMeasure, t: f64) -> Result<EmpiricalMeasure> {
        if !(0.0..=1.0).contains(&t) {
            return Err(DomlabError::Config(format!("mixture weight {t} outside [0, 1]")));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|(p, w)| (*p, t * w))
            .chain(other.atoms.iter().map(|(p, w)| (*p, (1.0 - t) * w)))
            .collect();
        EmpiricalMeasure::from_atoms(atoms)
    }

    pub fn integrate(&self, f: impl Fn(&TorusPoint) -> f64) -> f64 {
        pairwise_sum(&self.atoms.iter().map(|(p, w)| w * f(p)).collect::<Vec<_>>())
    }

    /// `(a·self + b·other)/(a + b)` for nonnegative `a`, `b`.
    pub fn combine(&self, a: f64, other: &EmpiricalMeasure, b: f64) -> Result<EmpiricalMeasure> {
        if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) {
            return Err(DomlabError::Config(format!("combination weights ({a}, {b}) must be nonnegative")));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|(p, w)| (*p, a * w))
            .chain(other.atoms.iter().map(|(p, w)| (*p, b * w)))
            .collect();
        EmpiricalMeasure::from_atoms(atoms)
    }

    /// Same support, weights equal to within `ulps` units in the last place.
    pub fn approx_eq_ulps(&self, other: &EmpiricalMeasure, ulps: u64) -> bool {
        self.atoms.len() == other.atoms.len()
            && self.atoms.iter().zip(&other.atoms).all(|(a, b)| {
                a.0 == b.0 && (a.1.to_bits() as i64 - b.1.to_bits() as i64).unsigned_abs() <= ulps
            })
    }
}

/// `σ_{n,x} = (1/n) Σ_{j<n} δ_{f^j(x)}`.
pub fn empirical_measure(map: &Diffeo, x: &TorusPoint, n: usize) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(DomlabError::Config("empirical measure needs n >= 1".into()));
    }
    EmpiricalMeasure::uniform(&map.orbit(x, n))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    Lebesgue { dim: usize },
    Atomic { measure: EmpiricalMeasure },
}

impl Measure {
    pub fn dirac(x: TorusPoint) -> Measure {
        Measure::Atomic { measure: EmpiricalMeasure::dirac(x) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::Lebesgue { dim } => *dim,
            Measure::Atomic { measure } => measure.dim(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Measure::Lebesgue { dim } => format!("lebesgue(T^{dim})"),
            Measure::Atomic { measure } if measure.len() == 1 => {
                format!("dirac{:?}", measure.atoms()[0].0)
            }
            Measure::Atomic { measure } => format!("atomic({} atoms)", measure.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    pub k: Vec<i64>,
    pub theta: f64,
}

impl TestFunction {
    pub fn eval(&self, x: &TorusPoint) -> f64 {
        let phase = self.k.iter().zip(x.coords()).map(|(k, c)| *k as f64 * c).sum::<f64>();
        0.5 * (1.0 + (2.0 * PI * phase + self.theta).cos())
    }
}

/// The first `N` cosine test functions. Frequencies `k ≠ 0` are taken from
/// the half-space whose first nonzero component is positive, ordered by
/// `‖k‖_∞`, then lexicographically, then by phase `0` before `π/2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunctionFamily {
    pub truncation: usize,
    pub dim: usize,
    pub members: Vec<TestFunction>,
}

impl TestFunctionFamily {
    pub fn new(dim: usize, truncation: usize) -> Result<TestFunctionFamily> {
        if truncation < 1 {
            return Err(DomlabError::Config("metric truncation N must be at least 1".into()));
        }
        if !(1..=3).contains(&dim) {
            return Err(DomlabError::Config(format!("test functions need dimension 1..3, got {dim}")));
        }
        let mut members = Vec::with_capacity(truncation);
        let mut radius = 1i64;
        while members.len() < truncation {
            for k in shell(dim, radius) {
                for theta in [0.0, PI / 2.0] {
                    if members.len() < truncation {
                        members.push(TestFunction { k: k.clone(), theta });
                    }
                }
            }
            radius += 1;
        }
        Ok(TestFunctionFamily { truncation, dim, members })
    }

    /// Upper bound on the neglected tail `Σ_{i>N} 2^{−i}·2`.
    pub fn truncation_error_bound(&self) -> f64 {
        2.0 * 0.5f64.powi(self.truncation as i32)
    }

    pub fn describe(&self) -> String {
        format!("cosine half-space family, N={}", self.truncation)
    }
}

/// Integer vectors with `‖k‖_∞ = r` whose first nonzero entry is positive,
/// in lexicographic order.
fn shell(dim: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut k = vec![-r; dim];
    loop {
        let on_shell = k.iter().map(|v| v.abs()).max() == Some(r);
        let positive = k.iter().find(|v| **v != 0).is_some_and(|v| *v > 0);
        if on_shell && positive {
            out.push(k.clone());
        }
        let mut i = dim;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if k[i] < r {
                k[i] += 1;
                k[i + 1..].iter_mut().for_each(|v| *v = -r);
                break;
            }
        }
    }
}

/// Integrals of `ψ` and of every test function against one measure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Signature {
    pub psi: Option<f64>,
    /// Quadrature error estimate of the `ψ` integral (0 for atomic measures).
    pub psi_error: f64,
    pub phi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakStarDistanceValue {
    pub value: f64,
    pub truncation_error_bound: f64,
    pub psi_term: Option<f64>,
    pub psi_quadrature_error: f64,
    /// "dist*" or "dist*_psi_less".
    pub metric: &'static str,
    pub family: String,
}

/// The metric: test family, optional `ψ` and the quadrature resolution used
/// for `∫ψ dLeb`.
#[derive(Clone, Copy)]
pub struct WeakStarMetric<'a> {
    pub family: &'a TestFunctionFamily,
    pub psi: Option<&'a dyn PsiEvaluator>,
    /// Grid points per axis for `∫ψ dLeb`; the error is estimated against a
    /// grid twice as fine.
    pub qmc_resolution: usize,
}

impl<'a> WeakStarMetric<'a> {
    pub fn new(family: &'a TestFunctionFamily, psi: Option<&'a dyn PsiEvaluator>) -> Self {
        let qmc_resolution = if family.dim == 3 { 16 } else { 64 };
        WeakStarMetric { family, psi, qmc_resolution }
    }

    pub fn label(&self) -> &'static str {
        if self.psi.is_some() {
            "dist*"
        } else {
            "dist*_psi_less"
        }
    }

    pub fn signature(&self, mu: &Measure) -> Result<Signature> {
        match mu {
            Measure::Lebesgue { dim } => {
                let (psi, psi_error) = match self.psi {
                    Some(p) => {
                        let (v, e) = lebesgue_psi_integral(p, *dim, self.qmc_resolution)?;
                        (Some(v), e)
                    }
                    None => (None, 0.0),
                };
                Ok(Signature { psi, psi_error, phi: vec![0.5; self.family.members.len()] })
            }
            Measure::Atomic { measure } => {
                let psi = match self.psi {
                    Some(p) => {
                        let vals: Vec<f64> = measure
                            .atoms()
                            .iter()
                            .map(|(x, w)| p.psi(x).map(|v| w * v))
                            .collect::<Result<_>>()?;
                        Some(pairwise_sum(&vals))
                    }
                    None => None,
                };
                let phi = self.family.members.iter().map(|f| measure.integrate(|x| f.eval(x))).collect();
                Ok(Signature { psi, psi_error: 0.0, phi })
            }
        }
    }

    /// Signatures of `σ_{n,x}` for every `n` in the increasing list `ns`,
    /// accumulated along one pass of the orbit.
    pub fn orbit_signatures(&self, map: &Diffeo, x: &TorusPoint, ns: &[usize]) -> Result<Vec<Signature>> {
        if ns.first() == Some(&0) || ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DomlabError::Config("n schedule must be positive and increasing".into()));
        }
        let psi_sums = match self.psi {
            Some(p) => Some(p.orbit_sums(x, ns)?),
            None => None,
        };
        let m = self.family.members.len();
        let mut sums = vec![0.0; m];
        let mut p = *x;
        let mut done = 0;
        let mut out = Vec::with_capacity(ns.len());
        for (idx, &n) in ns.iter().enumerate() {
            while done < n {
                for (s, f) in sums.iter_mut().zip(&self.family.members) {
                    *s += f.eval(&p);
                }
                p = map.apply(&p);
                done += 1;
            }
            out.push(Signature {
                psi: psi_sums.as_ref().map(|v| v[idx] / n as f64),
                psi_error: 0.0,
                phi: sums.iter().map(|s| s / n as f64).collect(),
            });
        }
        Ok(out)
    }

    /// `dist*` between two signatures. The test-function sum runs in order
    /// of `i`, so the value is symmetric bit for bit.
    pub fn signature_distance(&self, a: &Signature, b: &Signature) -> f64 {
        let psi_term = match (a.psi, b.psi) {
            (Some(x), Some(y)) => (x - y).abs(),
            _ => 0.0,
        };
        let mut weight = 1.0;
        let mut tail = 0.0;
        for (x, y) in a.phi.iter().zip(&b.phi) {
            weight *= 0.5;
            tail += weight * (x - y).abs();
        }
        psi_term + tail
    }

    pub fn distance(&self, mu1: &Measure, mu2: &Measure) -> Result<WeakStarDistanceValue> {
        let a = self.signature(mu1)?;
        let b = self.signature(mu2)?;
        Ok(self.value(&a, &b))
    }

    pub fn value(&self, a: &Signature, b: &Signature) -> WeakStarDistanceValue {
        let psi_term = match (a.psi, b.psi) {
            (Some(x), Some(y)) => Some((x - y).abs()),
            _ => None,
        };
        WeakStarDistanceValue {
            value: self.signature_distance(a, b),
            truncation_error_bound: self.family.truncation_error_bound(),
            psi_term,
            psi_quadrature_error: a.psi_error + b.psi_error,
            metric: self.label(),
            family: self.family.describe(),
        }
    }
}

/// `dist*(μ₁, μ₂)`; without a `ψ` evaluator the `ψ`-less variant is returned
/// and labeled as such.
pub fn weak_star_distance(
    mu1: &Measure,
    mu2: &Measure,
    family: &TestFunctionFamily,
    psi: Option<&dyn PsiEvaluator>,
) -> Result<WeakStarDistanceValue> {
    WeakStarMetric::new(family, psi).distance(mu1, mu2)
}

/// `∫ψ dLeb` by a jittered grid with `resolution` points per axis, and the
/// difference to a grid twice as fine as the error estimate.
pub fn lebesgue_psi_integral(psi: &dyn PsiEvaluator, dim: usize, resolution: usize) -> Result<(f64, f64)> {
    if let Some(c) = psi.constant() {
        return Ok((c, 0.0));
    }
    let mean = |res: usize| -> Result<f64> {
        let pts = LebesgueSample::grid(dim, res)?;
        let vals: Vec<f64> = pts.points().par_iter().map(|x| psi.psi(x)).collect::<Result<_>>()?;
        Ok(pairwise_sum(&vals) / vals.len() as f64)
    };
    let coarse = mean(resolution)?;
    let fine = mean(2 * resolution)?;
    Ok((fine, (fine - coarse).abs()))
}

/// Irrational per-axis offsets in `(0, 1)`: fractional parts of `√2, √3, √5`.
pub fn irrational_offsets() -> [f64; 3] {
    [2f64.sqrt(), 3f64.sqrt(), 5f64.sqrt()].map(|s| s - s.floor())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// `m^d` points `(i + o)/m` with irrational offsets `o`.
    Grid { per_axis: usize },
    /// Halton points with a seeded Cranley–Patterson shift.
    Halton { count: usize, seed: u64 },
}

/// Finite stand-in for Lebesgue measure.
#[derive(Clone, Debug)]
pub struct LebesgueSample {
    pub kind: SampleKind,
    dim: usize,
    points: Vec<TorusPoint>,
}

impl LebesgueSample {
    /// Grid offset by irrational fractions of a cell, so that no point sits
    /// on a rational periodic orbit or on a partition boundary.
    pub fn grid(dim: usize, per_axis: usize) -> Result<LebesgueSample> {
        if per_axis == 0 || !(2..=3).contains(&dim) {
            return Err(DomlabError::Config(format!(
                "grid needs dimension 2 or 3 and at least one point per axis (got d={dim}, m={per_axis})"
            )));
        }
        let total = per_axis.checked_pow(dim as u32).filter(|t| *t <= 1 << 26).ok_or_else(|| {
            DomlabError::Resource(format!("{per_axis}^{dim} grid points exceed the sample budget"))
        })?;
        let off = irrational_offsets();
        let m = per_axis as f64;
        let points = (0..total)
            .map(|mut idx| {
                let mut c = [0.0; 3];
                for a in (0..dim).rev() {
                    c[a] = ((idx % per_axis) as f64 + off[a]) / m;
                    idx /= per_axis;
                }
                TorusPoint::new(&c[..dim])
            })
            .collect();
        Ok(LebesgueSample { kind: SampleKind::Grid { per_axis }, dim, points })
    }

    pub fn halton(dim: usize, count: usize, seed: u64) -> Result<LebesgueSample> {
        use rand::Rng;
        if count == 0 || !(2..=3).contains(&dim) {
            return Err(DomlabError::Config("halton sample needs d in {2,3} and count >= 1".into()));
        }
        let mut rng = crate::rng::component_rng(seed, "lebesgue_sample");
        let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let bases = [2u64, 3, 5];
        let points = (1..=count as u64)
            .map(|i| {
                let c: Vec<f64> = (0..dim).map(|a| radical_inverse(i, bases[a]) + shift[a]).collect();
                TorusPoint::new(&c)
            })
            .collect();
        Ok(LebesgueSample { kind: SampleKind::Halton { count, seed }, dim, points })
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            SampleKind::Grid { per_axis } => format!("grid {per_axis}^{}", self.dim),
            SampleKind::Halton { count, seed } => format!("halton {count} (seed {seed})"),
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// `dist*(σ_{n,x}, μ)` for each sample point and each `n` of the schedule.
#[derive(Clone, Debug, Serialize)]
pub struct BasinSweep {
    pub ns: Vec<usize>,
    pub points: Vec<TorusPoint>,
    /// `distances[p][j]` is the distance at point `p` and `n = ns[j]`.
    pub distances: Vec<Vec<f64>>,
    pub target: String,
    pub metric: &'static str,
}

impl BasinSweep {
    /// Fraction of sample points in `C_n(ε)` for `n = ns[j]`.
    pub fn fraction(&self, j: usize, eps: f64) -> f64 {
        let inside = self.distances.iter().filter(|d| d[j] < eps).count();
        inside as f64 / self.points.len() as f64
    }

    pub fn fractions(&self, eps: f64) -> Vec<f64> {
        (0..self.ns.len()).map(|j| self.fraction(j, eps)).collect()
    }

    /// Rows `(x_0, …, n, eps, dist_value, in_basin)` for every point, `n`
    /// and `eps`.
    pub fn write_csv<W: Write>(&self, out: W, eps_list: &[f64]) -> Result<()> {
        let io = |e: csv::Error| DomlabError::Resource(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let dim = self.points.first().map_or(0, |p| p.dim());
        let mut header: Vec<String> = (0..dim).map(|a| format!("x_{a}")).collect();
        header.extend(["n", "eps", "dist_value", "in_basin"].map(String::from));
        w.write_record(&header).map_err(io)?;
        for (p, dists) in self.points.iter().zip(&self.distances) {
            for (j, n) in self.ns.iter().enumerate() {
                for eps in eps_list {
                    let mut row: Vec<String> = p.coords().iter().map(|c| format!("{c:.17e}")).collect();
                    row.push(n.to_string());
                    row.push(format!("{eps:e}"));
                    row.push(format!("{:.17e}", dists[j]));
                    row.push(u8::from(dists[j] < *eps).to_string());
                    w.write_record(&row).map_err(io)?;
                }
            }
        }
        w.flush().map_err(|e| DomlabError::Resource(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

pub fn basin_sweep(
    map: &Diffeo,
    mu: &Measure,
    ns: &[usize],
    sample: &LebesgueSample,
    metric: &WeakStarMetric,
) -> Result<BasinSweep> {
    if mu.dim() != map.dim() || sample.dim() != map.dim() {
        return Err(DomlabError::Config("measure, sample and map dimensions differ".into()));
    }
    let target = metric.signature(mu)?;
    let distances: Vec<Vec<f64>> = sample
        .points()
        .par_iter()
        .map(|x| {
            let sigs = metric.orbit_signatures(map, x, ns)?;
            Ok(sigs.iter().map(|s| metric.signature_distance(s, &target)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(BasinSweep {
        ns: ns.to_vec(),
        points: sample.points().to_vec(),
        distances,
        target: mu.describe(),
        metric: metric.label(),
    })
}

/// Fraction of `sample` in `C_n(ε) = {x : dist*(σ_{n,x}, μ) < ε}`.
pub fn approx_basin_fraction(
    map: &Diffeo,
    mu: &Measure,
    eps: f64,
    n: usize,
    sample: &LebesgueSample,
    metric: &WeakStarMetric,
) -> Result<f64> {
    if !(eps > metric.family.truncation_error_bound()) {
        return Err(DomlabError::Config(format!(
            "eps = {eps:e} does not exceed the metric truncation bound {:e}",
            metric.family.truncation_error_bound()
        )));
    }
    Ok(basin_sweep(map, mu, &[n], sample, metric)?.fraction(0, eps))
}

#[derive(Clone, Debug, Serialize)]
pub struct SrbLikeScore {
    pub ns: Vec<usize>,
    pub fractions: Vec<f64>,
    pub eps: f64,
    pub floor: f64,
    /// True when every fraction in the second half of the schedule exceeds
    /// the floor. This is a finite-resolution surrogate for `m(B_ε(μ)) > 0`.
    pub candidate: bool,
    pub label: String,
}

pub fn srb_like_score(
    map: &Diffeo,
    mu: &Measure,
    eps: f64,
    ns: &[usize],
    sample: &LebesgueSample,
    metric: &WeakStarMetric,
) -> Result<SrbLikeScore> {
    srb_like_score_with_floor(map, mu, eps, ns, sample, metric, 1.0 / sample.len() as f64)
}

pub fn srb_like_score_with_floor(
    map: &Diffeo,
    mu: &Measure,
    eps: f64,
    ns: &[usize],
    sample: &LebesgueSample,
    metric: &WeakStarMetric,
    floor: f64,
) -> Result<SrbLikeScore> {
    let sweep = basin_sweep(map, mu, ns, sample, metric)?;
    Ok(score_from_sweep(&sweep, eps, floor, sample))
}

pub fn score_from_sweep(sweep: &BasinSweep, eps: f64, floor: f64, sample: &LebesgueSample) -> SrbLikeScore {
    let fractions = sweep.fractions(eps);
    let half = fractions.len() / 2;
    let candidate = !fractions.is_empty() && fractions[half..].iter().all(|f| *f > floor);
    let label = format!(
        "{} at resolution (eps={eps}, sample={}, {})",
        if candidate { "SRB-like candidate" } else { "not SRB-like" },
        sample.describe(),
        sweep.metric
    );
    SrbLikeScore { ns: sweep.ns.clone(), fractions, eps, floor, candidate, label }
}

#[derive(Clone, Debug, Serialize)]
pub struct PomegaCluster {
    pub ns: Vec<usize>,
    pub measures: Vec<EmpiricalMeasure>,
    pub distances: Vec<Vec<f64>>,
}

impl PomegaCluster {
    /// Largest distance among entries with `n ≥ n_min`.
    pub fn max_distance_from(&self, n_min: usize) -> f64 {
        let idx: Vec<usize> = (0..self.ns.len()).filter(|&i| self.ns[i] >= n_min).collect();
        idx.iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.distances[i][j])
            .fold(0.0, f64::max)
    }
}

/// Empirical measures along an `n` schedule and their pairwise distances.
pub fn pomega_cluster(
    map: &Diffeo,
    x: &TorusPoint,
    ns: &[usize],
    metric: &WeakStarMetric,
) -> Result<PomegaCluster> {
    if ns.len() < 2 || ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DomlabError::Config("pω schedule must be increasing with at least two entries".into()));
    }
    let measures: Vec<EmpiricalMeasure> =
        ns.iter().map(|&n| empirical_measure(map, x, n)).collect::<Result<_>>()?;
    let sigs: Vec<Signature> = measures
        .iter()
        .map(|m| metric.signature(&Measure::Atomic { measure: m.clone() }))
        .collect::<Result<_>>()?;
    let distances = sigs
        .iter()
        .map(|a| sigs.iter().map(|b| metric.signature_distance(a, b)).collect())
        .collect();
    Ok(PomegaCluster { ns: ns.to_vec(), measures, distances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{SplittingField, SplittingPsi};

    #[test]
    fn family_enumeration_starts_with_unit_shell() {
        let fam = TestFunctionFamily::new(2, 10).unwrap();
        let ks: Vec<Vec<i64>> = fam.members.iter().map(|m| m.k.clone()).collect();
        assert_eq!(ks[0], vec![0, 1]);
        assert_eq!(ks[2], vec![1, -1]);
        assert_eq!(ks[4], vec![1, 0]);
        assert_eq!(ks[6], vec![1, 1]);
        assert_eq!(ks[8], vec![0, 2]);
        assert_eq!(fam.members[1].theta, PI / 2.0);
    }

    #[test]
    fn fixed_point_gives_single_atom() {
        let m = empirical_measure(&Diffeo::Cat, &TorusPoint::origin(2), 25).unwrap();
        assert_eq!(m.atoms(), &[(TorusPoint::origin(2), 1.0)]);
    }

    #[test]
    fn period_two_orbit_has_two_half_atoms() {
        let m = empirical_measure(&Diffeo::Cat, &TorusPoint::new(&[0.8, 0.6]), 2).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.atoms().iter().all(|a| a.1 == 0.5));
    }

    #[test]
    fn self_distance_is_zero_and_grid_avoids_origin() {
        let fam = TestFunctionFamily::new(2, 16).unwrap();
        let s = SplittingField::cat();
        let psi = SplittingPsi::new(&Diffeo::Cat, &s);
        let leb = Measure::Lebesgue { dim: 2 };
        let d = weak_star_distance(&leb, &leb, &fam, Some(&psi)).unwrap();
        assert_eq!(d.value, 0.0);
        let g = LebesgueSample::grid(2, 64).unwrap();
        assert!(g.points().iter().all(|p| p.distance(&TorusPoint::origin(2)) > 1e-3));
    }
}
