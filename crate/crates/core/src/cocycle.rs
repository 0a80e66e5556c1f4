//! Tangent cocycle: Lyapunov spectra, estimated `E ⊕ F` splittings, the
//! domination constants `(C, λ)` and the functionals `ψ`, `ψ_n`.
//!
//! `ψ(x) = −log |det df(x)|_{F_x}|` is evaluated as a Gram-volume ratio of
//! the pushed-forward `F` frame, so it never needs `F` in closed form.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dynamics::{Diffeo, TorusPoint};
use crate::error::{DomlabError, Result};
use crate::numeric::{
    condition_number, gram_volume, operator_norm, orthonormalize, pairwise_mean, pairwise_sum,
    qr_log_diag, subspace_distance,
};

/// Steps discarded before exponents are accumulated, so the QR frame has
/// aligned with the Oseledets directions.
pub const DEFAULT_TRANSIENT: usize = 100;
pub const DEFAULT_PUSH: usize = 40;
/// Required ratio between the singular values on either side of the split.
pub const REQUIRED_GAP: f64 = 10.0;
/// Nearest-sample lookup radius for sampled splittings.
pub const LOOKUP_RADIUS: f64 = 1e-3;
pub const MAX_CONDITION: f64 = 1e8;
/// Residual above which a splitting is not used for domination fits.
/// Slopes within this distance of zero count as flat in the domination fit.
pub const SLOPE_NOISE: f64 = 1e-9;
pub const FIT_RESIDUAL_LIMIT: f64 = 1e-4;

/// A fixed orthonormal frame in general position, used as the starting
/// frame of every push-forward so that no catalog-invariant subspace is hit.
pub fn generic_frame(d: usize) -> DMatrix<f64> {
    let seeds = [
        2f64.sqrt(),
        3f64.sqrt(),
        5f64.sqrt(),
        7f64.sqrt(),
        11f64.sqrt(),
        13f64.sqrt(),
        17f64.sqrt(),
        19f64.sqrt(),
        23f64.sqrt(),
    ];
    let m = DMatrix::from_fn(d, d, |i, j| {
        let s = seeds[i * 3 + j];
        let base = if i == j { 1.0 } else { 0.0 };
        base + (s - s.floor()) - 0.5
    });
    orthonormalize(&m)
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovReport {
    pub exponents: Vec<f64>,
    pub n_iterations: usize,
    pub base_point: TorusPoint,
    pub transient: usize,
    pub reorth_every: usize,
    /// Orbit average of `log |det df|`, equal to the exponent sum.
    pub mean_log_det: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct LyapunovOptions {
    pub n: usize,
    pub reorth_every: usize,
    pub transient: usize,
}

impl LyapunovOptions {
    pub fn new(n: usize) -> Self {
        LyapunovOptions { n, reorth_every: 1, transient: DEFAULT_TRANSIENT }
    }
}

pub fn lyapunov_spectrum(
    map: &Diffeo,
    x0: &TorusPoint,
    n: usize,
    reorth_every: usize,
) -> Result<LyapunovReport> {
    lyapunov_spectrum_with(map, x0, &LyapunovOptions { reorth_every, ..LyapunovOptions::new(n) })
}

/// Benettin QR iteration. After `transient` warm-up steps the frame is
/// pushed `reorth_every` steps at a time and re-orthonormalized; exponents
/// are the averaged `log |R_ii|`.
pub fn lyapunov_spectrum_with(
    map: &Diffeo,
    x0: &TorusPoint,
    opts: &LyapunovOptions,
) -> Result<LyapunovReport> {
    if opts.n == 0 || opts.reorth_every == 0 {
        return Err(DomlabError::Config(
            "lyapunov_spectrum needs n >= 1 and reorth_every >= 1".into(),
        ));
    }
    let d = map.dim();
    let mut q = DMatrix::identity(d, d);
    let mut p = *x0;
    for step in 0..opts.transient {
        let (qq, _) = qr_log_diag(map.jacobian_at(p.coords()) * q);
        q = qq;
        p = map.apply(&p);
        if !p.is_finite() {
            return Err(DomlabError::Overflow { step });
        }
    }
    let mut acc = vec![0.0; d];
    let mut log_dets = Vec::with_capacity(opts.n);
    let mut done = 0;
    while done < opts.n {
        let block = opts.reorth_every.min(opts.n - done);
        for _ in 0..block {
            let j = map.jacobian_at(p.coords());
            log_dets.push(j.determinant().abs().ln());
            q = j * q;
            p = map.apply(&p);
        }
        done += block;
        if q.iter().any(|v| !v.is_finite()) || !p.is_finite() {
            return Err(DomlabError::Overflow { step: opts.transient + done });
        }
        let (qq, logs) = qr_log_diag(q);
        q = qq;
        for (a, l) in acc.iter_mut().zip(logs) {
            *a += l;
        }
    }
    let mut exponents: Vec<f64> = acc.iter().map(|a| a / opts.n as f64).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovReport {
        exponents,
        n_iterations: opts.n,
        base_point: *x0,
        transient: opts.transient,
        reorth_every: opts.reorth_every,
        mean_log_det: pairwise_mean(&log_dets),
    })
}

/// Orthonormal bases of `E_x` and `F_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub basis_e: DMatrix<f64>,
    pub basis_f: DMatrix<f64>,
}

impl Frame {
    /// Orthonormalizes both bases and rejects nearly dependent pairs.
    pub fn new(basis_e: DMatrix<f64>, basis_f: DMatrix<f64>) -> Result<Frame> {
        if basis_e.nrows() != basis_f.nrows()
            || basis_e.ncols() == 0
            || basis_f.ncols() == 0
            || basis_e.ncols() + basis_f.ncols() != basis_e.nrows()
        {
            return Err(DomlabError::DegenerateFrame(format!(
                "bases of shape {}x{} and {}x{} do not split R^d",
                basis_e.nrows(),
                basis_e.ncols(),
                basis_f.nrows(),
                basis_f.ncols()
            )));
        }
        let frame = Frame { basis_e: orthonormalize(&basis_e), basis_f: orthonormalize(&basis_f) };
        let cond = frame.condition();
        if !(cond < MAX_CONDITION) {
            return Err(DomlabError::DegenerateFrame(format!("condition number {cond:.3e}")));
        }
        Ok(frame)
    }

    pub fn dim(&self) -> usize {
        self.basis_e.nrows()
    }

    /// `[B_E | B_F]`.
    pub fn combined(&self) -> DMatrix<f64> {
        let d = self.dim();
        let de = self.basis_e.ncols();
        DMatrix::from_fn(d, d, |i, j| {
            if j < de {
                self.basis_e[(i, j)]
            } else {
                self.basis_f[(i, j - de)]
            }
        })
    }

    pub fn condition(&self) -> f64 {
        condition_number(&self.combined())
    }
}

/// Estimates `(E_x, F_x)` by pushing a generic frame forward along the
/// backward orbit (for `F`) and backward along the forward orbit (for `E`).
/// Returns the frame and the smaller of the two log singular-value gaps.
pub fn estimate_frame(
    map: &Diffeo,
    x: &TorusPoint,
    n_push: usize,
    dim_f: usize,
) -> Result<(Frame, f64)> {
    let d = map.dim();
    check_dims(d, dim_f)?;
    let dim_e = d - dim_f;
    let mut back = Vec::with_capacity(n_push);
    let mut p = *x;
    for _ in 0..n_push {
        p = map.apply_inverse(&p);
        back.push(p);
    }
    let mut q = generic_frame(d);
    let mut acc = vec![0.0; d];
    for y in back.iter().rev() {
        let (qq, logs) = qr_log_diag(map.jacobian_at(y.coords()) * q);
        q = qq;
        acc.iter_mut().zip(logs).for_each(|(a, l)| *a += l);
    }
    let basis_f = q.columns(0, dim_f).into_owned();
    let gap_f = acc[dim_f - 1] - acc[dim_f];

    let forward = map.orbit(x, n_push);
    let mut q = generic_frame(d);
    let mut acc = vec![0.0; d];
    for y in forward.iter().rev() {
        let inv = map
            .jacobian_at(y.coords())
            .try_inverse()
            .ok_or_else(|| DomlabError::Numerical("singular Jacobian".into()))?;
        let (qq, logs) = qr_log_diag(inv * q);
        q = qq;
        acc.iter_mut().zip(logs).for_each(|(a, l)| *a += l);
    }
    let basis_e = q.columns(0, dim_e).into_owned();
    let gap_e = acc[dim_e - 1] - acc[dim_e];
    let gap = gap_f.min(gap_e);
    if !(gap > REQUIRED_GAP.ln()) {
        return Err(DomlabError::SplittingNotResolvable {
            gap: gap.max(0.0).exp(),
            required: REQUIRED_GAP,
        });
    }
    Ok((Frame::new(basis_e, basis_f)?, gap))
}

fn check_dims(d: usize, dim_f: usize) -> Result<()> {
    if dim_f == 0 || dim_f >= d {
        return Err(DomlabError::Config(format!(
            "dim_F must satisfy 1 <= dim_F < {d}, got {dim_f}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SplittingSample {
    pub point: TorusPoint,
    pub frame: Frame,
    /// Log singular-value gap seen by the estimator.
    pub log_gap: f64,
}

#[derive(Clone, Debug)]
struct Estimator {
    map: Diffeo,
    n_push: usize,
}

#[derive(Clone, Debug)]
enum Source {
    /// One frame valid at every point.
    Uniform { frame: Frame, analytic: bool },
    Sampled {
        samples: Vec<SplittingSample>,
        index: HashMap<Vec<i64>, Vec<usize>>,
        estimator: Option<Estimator>,
    },
}

/// A field of frames `x ↦ (E_x, F_x)`.
#[derive(Clone, Debug)]
pub struct SplittingField {
    dim_e: usize,
    dim_f: usize,
    source: Source,
    residual: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SplittingSummary {
    pub source: &'static str,
    pub dim_e: usize,
    pub dim_f: usize,
    pub samples: usize,
    pub equivariance_residual: Option<f64>,
    pub min_log_gap: Option<f64>,
}

fn hash_key(x: &TorusPoint) -> Vec<i64> {
    x.coords().iter().map(|c| (c / LOOKUP_RADIUS).floor() as i64).collect()
}

const CELLS: i64 = (1.0 / LOOKUP_RADIUS) as i64;

impl SplittingField {
    /// The same frame at every point.
    pub fn uniform(basis_e: DMatrix<f64>, basis_f: DMatrix<f64>) -> Result<SplittingField> {
        let frame = Frame::new(basis_e, basis_f)?;
        Ok(SplittingField {
            dim_e: frame.basis_e.ncols(),
            dim_f: frame.basis_f.ncols(),
            source: Source::Uniform { frame, analytic: false },
            residual: None,
        })
    }

    /// Eigen-splitting of the cat matrix: `E` along `(1, −φ)`, `F` along
    /// `(1, φ − 1)` with `φ` the golden ratio.
    pub fn cat() -> SplittingField {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let e = DMatrix::from_column_slice(2, 1, &[1.0, -phi]);
        let f = DMatrix::from_column_slice(2, 1, &[1.0, phi - 1.0]);
        Self::analytic(e, f)
    }

    /// Splitting of `cat_circle` at `κ = 0`. With `dim_f = 2`, `F` is the
    /// unstable direction plus the fibre; with `dim_f = 1`, the fibre joins `E`.
    pub fn cat_circle(dim_f: usize) -> Result<SplittingField> {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let s = [1.0, -phi, 0.0];
        let u = [1.0, phi - 1.0, 0.0];
        let z = [0.0, 0.0, 1.0];
        let (e, f): (Vec<[f64; 3]>, Vec<[f64; 3]>) = match dim_f {
            1 => (vec![s, z], vec![u]),
            2 => (vec![s], vec![u, z]),
            _ => return Err(DomlabError::Config(format!("dim_F must be 1 or 2 on T^3, got {dim_f}"))),
        };
        let cols = |v: &[[f64; 3]]| DMatrix::from_column_slice(3, v.len(), &v.concat());
        Ok(Self::analytic(cols(&e), cols(&f)))
    }

    fn analytic(e: DMatrix<f64>, f: DMatrix<f64>) -> SplittingField {
        let frame = Frame::new(e, f).expect("analytic frames are well conditioned");
        SplittingField {
            dim_e: frame.basis_e.ncols(),
            dim_f: frame.basis_f.ncols(),
            source: Source::Uniform { frame, analytic: true },
            residual: None,
        }
    }

    /// Closed-form splitting when the map has one.
    pub fn analytic_for(map: &Diffeo, dim_f: usize) -> Option<SplittingField> {
        match map {
            Diffeo::Cat | Diffeo::PerturbedCat { eps: 0.0 } if dim_f == 1 => Some(Self::cat()),
            Diffeo::CatCircle { kappa } if *kappa == 0.0 => Self::cat_circle(dim_f).ok(),
            _ => None,
        }
    }

    /// A field with no stored samples that estimates the frame wherever it
    /// is queried.
    pub fn on_demand(map: &Diffeo, dim_f: usize, n_push: usize) -> Result<SplittingField> {
        check_dims(map.dim(), dim_f)?;
        Ok(SplittingField {
            dim_e: map.dim() - dim_f,
            dim_f,
            source: Source::Sampled {
                samples: Vec::new(),
                index: HashMap::new(),
                estimator: Some(Estimator { map: map.clone(), n_push }),
            },
            residual: None,
        })
    }

    /// Analytic splitting if available, otherwise an on-demand estimate.
    pub fn for_map(map: &Diffeo, dim_f: usize) -> Result<SplittingField> {
        match Self::analytic_for(map, dim_f) {
            Some(s) => Ok(s),
            None => Self::on_demand(map, dim_f, DEFAULT_PUSH),
        }
    }

    pub fn dim_e(&self) -> usize {
        self.dim_e
    }

    pub fn dim_f(&self) -> usize {
        self.dim_f
    }

    pub fn dim(&self) -> usize {
        self.dim_e + self.dim_f
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.source, Source::Uniform { .. })
    }

    pub fn samples(&self) -> &[SplittingSample] {
        match &self.source {
            Source::Uniform { .. } => &[],
            Source::Sampled { samples, .. } => samples,
        }
    }

    /// Largest equivariance residual measured when the field was built,
    /// if it was measured.
    pub fn equivariance_residual(&self) -> Option<f64> {
        self.residual
    }

    pub fn summary(&self) -> SplittingSummary {
        let (source, samples, gap) = match &self.source {
            Source::Uniform { analytic: true, .. } => ("analytic", 0, None),
            Source::Uniform { .. } => ("uniform", 0, None),
            Source::Sampled { samples, .. } => (
                if samples.is_empty() { "on_demand" } else { "sampled" },
                samples.len(),
                samples.iter().map(|s| s.log_gap).reduce(f64::min),
            ),
        };
        SplittingSummary {
            source,
            dim_e: self.dim_e,
            dim_f: self.dim_f,
            samples,
            equivariance_residual: self.residual,
            min_log_gap: gap,
        }
    }

    /// Frame at `x`: the uniform frame, the nearest stored sample within
    /// [`LOOKUP_RADIUS`], or a fresh estimate.
    pub fn frame_at(&self, x: &TorusPoint) -> Result<Frame> {
        match &self.source {
            Source::Uniform { frame, .. } => Ok(frame.clone()),
            Source::Sampled { samples, index, estimator } => {
                if let Some(i) = nearest_sample(samples, index, x) {
                    return Ok(samples[i].frame.clone());
                }
                match estimator {
                    Some(est) => Ok(estimate_frame(&est.map, x, est.n_push, self.dim_f)?.0),
                    None => Err(DomlabError::NoFrame { radius: LOOKUP_RADIUS }),
                }
            }
        }
    }

    pub fn basis_f(&self, x: &TorusPoint) -> Result<DMatrix<f64>> {
        Ok(self.frame_at(x)?.basis_f)
    }

    pub fn basis_e(&self, x: &TorusPoint) -> Result<DMatrix<f64>> {
        Ok(self.frame_at(x)?.basis_e)
    }

    /// Measures and stores the equivariance residual over `points`.
    pub fn with_residual(mut self, map: &Diffeo, points: &[TorusPoint]) -> Result<SplittingField> {
        self.residual = Some(equivariance_residual(map, &self, points)?);
        Ok(self)
    }
}

fn nearest_sample(
    samples: &[SplittingSample],
    index: &HashMap<Vec<i64>, Vec<usize>>,
    x: &TorusPoint,
) -> Option<usize> {
    if samples.is_empty() {
        return None;
    }
    let key = hash_key(x);
    let d = key.len();
    let mut best: Option<(f64, usize)> = None;
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let neighbour: Vec<i64> = key
            .iter()
            .map(|k| {
                let off = (c % 3) as i64 - 1;
                c /= 3;
                (k + off).rem_euclid(CELLS)
            })
            .collect();
        for &i in index.get(&neighbour).into_iter().flatten() {
            let dist = samples[i].point.distance(x);
            if dist <= LOOKUP_RADIUS && best.is_none_or(|(bd, bi)| (dist, i) < (bd, bi)) {
                best = Some((dist, i));
            }
        }
    }
    best.map(|(_, i)| i)
}

/// Estimates the splitting at each of `orbit_points`. Queries off the sample
/// set fall back to the same estimator.
pub fn oseledets_splitting(
    map: &Diffeo,
    orbit_points: &[TorusPoint],
    n_push: usize,
    dim_f: usize,
) -> Result<SplittingField> {
    check_dims(map.dim(), dim_f)?;
    let samples: Vec<SplittingSample> = orbit_points
        .par_iter()
        .map(|x| {
            estimate_frame(map, x, n_push, dim_f)
                .map(|(frame, log_gap)| SplittingSample { point: *x, frame, log_gap })
        })
        .collect::<Result<_>>()?;
    let mut index: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        index.entry(hash_key(&s.point)).or_default().push(i);
    }
    let field = SplittingField {
        dim_e: map.dim() - dim_f,
        dim_f,
        source: Source::Sampled {
            samples,
            index,
            estimator: Some(Estimator { map: map.clone(), n_push }),
        },
        residual: None,
    };
    field.with_residual(map, orbit_points)
}

/// Largest angle (as a sine) between `df(x)·E_x` and `E_{f(x)}`, and
/// likewise for `F`, over `points`.
pub fn equivariance_residual(
    map: &Diffeo,
    field: &SplittingField,
    points: &[TorusPoint],
) -> Result<f64> {
    let per_point: Vec<f64> = points
        .par_iter()
        .map(|x| {
            let here = field.frame_at(x)?;
            let there = field.frame_at(&map.apply(x))?;
            let j = map.jacobian_at(x.coords());
            let e = orthonormalize(&(&j * &here.basis_e));
            let f = orthonormalize(&(&j * &here.basis_f));
            Ok(subspace_distance(&e, &there.basis_e).max(subspace_distance(&f, &there.basis_f)))
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().fold(0.0, f64::max))
}

/// Left dominant `k`-dimensional singular subspace of `df^n(x)`, a subspace
/// of the tangent space at `f^n(x)`.
pub fn dominant_singular_subspace(map: &Diffeo, x: &TorusPoint, n: usize, k: usize) -> DMatrix<f64> {
    let m = map.jacobian_power(x, n);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, order[j])])
}

/// Pushes `basis` through `mats` in order and returns the smallest singular
/// value of the product applied to `basis`. The triangular factors are
/// accumulated separately from their determinant so weak directions are not
/// swamped by strong ones. Bases have at most two columns on `T^3`.
fn pushed_min_singular<'a>(
    basis: &DMatrix<f64>,
    mats: impl Iterator<Item = &'a DMatrix<f64>>,
) -> f64 {
    let k = basis.ncols();
    let mut q = basis.clone();
    let mut shape = DMatrix::identity(k, k);
    let mut log_det = 0.0;
    for m in mats {
        let qr = (m * &q).qr();
        let r = qr.r();
        log_det += (0..k).map(|i| r[(i, i)].abs().ln()).sum::<f64>();
        shape = r * shape;
        shape /= operator_norm(&shape);
        q = qr.q().columns(0, k).into_owned();
    }
    match k {
        1 => log_det.exp(),
        2 => {
            // σ_min·σ_max = det and σ_min/σ_max is read off the shape.
            let ratio = shape.determinant().abs() / operator_norm(&shape).powi(2);
            (0.5 * (log_det + ratio.ln())).exp()
        }
        _ => unreachable!("splitting bundles have at most two dimensions"),
    }
}

/// `(‖df^n|_{E_x}‖, ‖df^{−n}|_{F_{f^n x}}‖)` for `n = 1..=n_max`.
///
/// Both norms are computed through the contracting direction of the
/// respective push: `‖df^n|_E‖ = 1/σ_min(df^{−n}|_{E_{f^n x}})` and
/// `‖df^{−n}|_F‖ = 1/σ_min(df^n|_{F_x})`, which relies on invariance of the
/// splitting and keeps both products well conditioned.
pub fn domination_profile(
    map: &Diffeo,
    splitting: &SplittingField,
    x: &TorusPoint,
    n_max: usize,
) -> Result<Vec<(f64, f64)>> {
    let orbit = map.orbit(x, n_max + 1);
    let jac: Vec<DMatrix<f64>> = orbit[..n_max].iter().map(|p| map.jacobian_at(p.coords())).collect();
    let inv: Vec<DMatrix<f64>> = jac
        .iter()
        .map(|j| j.clone().try_inverse().ok_or_else(|| DomlabError::Numerical("singular Jacobian".into())))
        .collect::<Result<_>>()?;
    let basis_f = splitting.basis_f(x)?;
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let f_min = pushed_min_singular(&basis_f, jac[..n].iter());
        let basis_e = splitting.basis_e(&orbit[n])?;
        let e_min = pushed_min_singular(&basis_e, inv[..n].iter().rev());
        out.push((1.0 / e_min, 1.0 / f_min));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationFit {
    #[serde(rename = "C")]
    pub c: f64,
    pub lambda: f64,
    pub slope: f64,
    pub intercept: f64,
    pub slope_upper95: f64,
    /// Per-n regression residuals of the worst-case log-product.
    pub residuals: Vec<f64>,
    /// Worst case over the sample of `log(‖df^n|_E‖·‖df^{−n}|_F‖)`.
    pub worst_log_product: Vec<f64>,
    pub n_range: (usize, usize),
    pub sample_points: usize,
    pub splitting_residual: f64,
    pub dominated: bool,
    /// "dominated" or "no domination detected".
    pub verdict: String,
}

/// Fits `log(‖df^n|_E‖·‖df^{−n}|_F‖) ≈ log C + n log λ` to the per-n worst
/// case over `points`, for `n = 1..=n_max`.
pub fn domination_fit(
    map: &Diffeo,
    splitting: &SplittingField,
    points: &[TorusPoint],
    n_max: usize,
) -> Result<DominationFit> {
    if n_max < 3 {
        return Err(DomlabError::Config("domination_fit needs n_max >= 3".into()));
    }
    if points.is_empty() {
        return Err(DomlabError::Config("domination_fit needs sample points".into()));
    }
    let residual = match splitting.equivariance_residual() {
        Some(r) => r,
        None => equivariance_residual(map, splitting, points)?,
    };
    if !(residual < FIT_RESIDUAL_LIMIT) {
        return Err(DomlabError::SplittingResidual { residual, limit: FIT_RESIDUAL_LIMIT });
    }
    let profiles: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            domination_profile(map, splitting, x, n_max)
                .map(|p| p.into_iter().map(|(e, f)| e.ln() + f.ln()).collect())
        })
        .collect::<Result<_>>()?;
    let worst: Vec<f64> = (0..n_max)
        .map(|i| profiles.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let ns: Vec<f64> = (1..=n_max).map(|n| n as f64).collect();
    let line = least_squares(&ns, &worst);
    let c = (line.intercept + line.residuals.iter().fold(0.0_f64, |a, &r| a.max(r))).exp();
    let dominated = line.slope < -SLOPE_NOISE && line.slope_upper95 < -SLOPE_NOISE;
    Ok(DominationFit {
        c,
        lambda: line.slope.exp(),
        slope: line.slope,
        intercept: line.intercept,
        slope_upper95: line.slope_upper95,
        residuals: line.residuals,
        worst_log_product: worst,
        n_range: (1, n_max),
        sample_points: points.len(),
        splitting_residual: residual,
        dominated,
        verdict: if dominated { "dominated" } else { "no domination detected" }.to_string(),
    })
}

/// Domination verdict for a map. When no splitting can be resolved the
/// fit falls back to the coordinate frame, and the verdict is negative.
#[derive(Clone, Debug, Serialize)]
pub struct DominationAssessment {
    pub fit: DominationFit,
    /// Set when the splitting could not be resolved and coordinate axes were used.
    pub splitting_error: Option<String>,
    pub dominated: bool,
    pub verdict: String,
}

pub fn assess_domination(map: &Diffeo, dim_f: usize, points: &[TorusPoint], n_max: usize) -> Result<DominationAssessment> {
    let resolved = SplittingField::for_map(map, dim_f).and_then(|field| domination_fit(map, &field, points, n_max));
    match resolved {
        Ok(fit) => Ok(DominationAssessment { dominated: fit.dominated, verdict: fit.verdict.clone(), fit, splitting_error: None }),
        Err(err @ DomlabError::SplittingNotResolvable { .. }) => {
            let d = map.dim();
            check_dims(d, dim_f)?;
            let id = DMatrix::<f64>::identity(d, d);
            let field = SplittingField::uniform(id.columns(0, d - dim_f).into(), id.columns(d - dim_f, dim_f).into())?;
            let fit = domination_fit(map, &field, points, n_max)?;
            Ok(DominationAssessment {
                dominated: false,
                verdict: "no domination detected".to_string(),
                fit,
                splitting_error: Some(err.to_string()),
            })
        }
        Err(e) => Err(e),
    }
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_upper95: f64,
    residuals: Vec<f64>,
}

fn least_squares(x: &[f64], y: &[f64]) -> Line {
    let m = x.len() as f64;
    let mx = pairwise_sum(x) / m;
    let my = pairwise_sum(y) / m;
    let sxx = pairwise_sum(&x.iter().map(|a| (a - mx) * (a - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(&x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let dof = x.len() - 2;
    let ssr = pairwise_sum(&residuals.iter().map(|r| r * r).collect::<Vec<_>>());
    let se = (ssr / dof as f64 / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof as f64)
        .map(|d| d.inverse_cdf(0.95))
        .unwrap_or(f64::INFINITY);
    Line { slope, intercept, slope_upper95: slope + t * se, residuals }
}

/// `ψ(x) = −log |det df(x)|_{F_x}|`.
pub fn psi(map: &Diffeo, splitting: &SplittingField, x: &TorusPoint) -> Result<f64> {
    let bf = splitting.basis_f(x)?;
    psi_with_basis(map, x, &bf)
}

fn psi_with_basis(map: &Diffeo, x: &TorusPoint, bf: &DMatrix<f64>) -> Result<f64> {
    let before = gram_volume(bf);
    let after = gram_volume(&(map.jacobian_at(x.coords()) * bf));
    if !(before > 0.0 && after > 0.0 && after.is_finite()) {
        return Err(DomlabError::DegenerateFrame(format!("F-basis volume {before:.3e} -> {after:.3e}")));
    }
    Ok(-(after / before).ln())
}

/// `ψ_n(x) = Σ_{j<n} ψ(f^j x)`, with the splitting queried at each point.
pub fn psi_n(map: &Diffeo, splitting: &SplittingField, x: &TorusPoint, n: usize) -> Result<f64> {
    let terms: Vec<f64> =
        map.orbit(x, n).iter().map(|p| psi(map, splitting, p)).collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

/// `−log |det df^n(x)|_{F_x}|` from the push-forward of `F_x` alone.
pub fn psi_n_direct(map: &Diffeo, splitting: &SplittingField, x: &TorusPoint, n: usize) -> Result<f64> {
    let bf = splitting.basis_f(x)?;
    let mut q = orthonormalize(&bf);
    let mut log_vol = (gram_volume(&q) / gram_volume(&bf)).ln();
    let mut p = *x;
    for _ in 0..n {
        let (qq, logs) = qr_log_diag(map.jacobian_at(p.coords()) * q);
        q = qq;
        log_vol += logs.iter().sum::<f64>();
        p = map.apply(&p);
    }
    Ok(-log_vol)
}

/// Evaluates `ψ` and its orbit sums for the weak* metric.
pub trait PsiEvaluator: Sync {
    fn psi(&self, x: &TorusPoint) -> Result<f64>;
    /// `ψ_n(x)`.
    fn orbit_sum(&self, x: &TorusPoint, n: usize) -> Result<f64>;
    /// `ψ_n(x)` for each `n` in the increasing list `ns`.
    fn orbit_sums(&self, x: &TorusPoint, ns: &[usize]) -> Result<Vec<f64>> {
        ns.iter().map(|&n| self.orbit_sum(x, n)).collect()
    }
    /// `Some(c)` when `ψ ≡ c`.
    fn constant(&self) -> Option<f64>;
    fn label(&self) -> String;
}

/// `ψ` from a map and a splitting field. Orbit sums push `F_x` forward,
/// which is what invariance prescribes for `F` along the orbit.
pub struct SplittingPsi<'a> {
    pub map: &'a Diffeo,
    pub splitting: &'a SplittingField,
}

impl<'a> SplittingPsi<'a> {
    pub fn new(map: &'a Diffeo, splitting: &'a SplittingField) -> Self {
        SplittingPsi { map, splitting }
    }
}

impl PsiEvaluator for SplittingPsi<'_> {
    fn psi(&self, x: &TorusPoint) -> Result<f64> {
        match self.constant() {
            Some(c) => Ok(c),
            None => psi(self.map, self.splitting, x),
        }
    }

    fn orbit_sum(&self, x: &TorusPoint, n: usize) -> Result<f64> {
        match self.constant() {
            Some(c) => Ok(c * n as f64),
            None => psi_n_direct(self.map, self.splitting, x, n),
        }
    }

    fn orbit_sums(&self, x: &TorusPoint, ns: &[usize]) -> Result<Vec<f64>> {
        if let Some(c) = self.constant() {
            return Ok(ns.iter().map(|&n| c * n as f64).collect());
        }
        let bf = self.splitting.basis_f(x)?;
        let mut q = orthonormalize(&bf);
        let mut log_vol = (gram_volume(&q) / gram_volume(&bf)).ln();
        let mut p = *x;
        let mut done = 0;
        let mut out = Vec::with_capacity(ns.len());
        for &n in ns {
            while done < n {
                let (qq, logs) = qr_log_diag(self.map.jacobian_at(p.coords()) * q);
                q = qq;
                log_vol += logs.iter().sum::<f64>();
                p = self.map.apply(&p);
                done += 1;
            }
            out.push(-log_vol);
        }
        Ok(out)
    }

    fn constant(&self) -> Option<f64> {
        if self.map.is_linear() && self.splitting.is_uniform() {
            let origin = TorusPoint::origin(self.map.dim());
            psi(self.map, self.splitting, &origin).ok()
        } else {
            None
        }
    }

    fn label(&self) -> String {
        format!("psi[{}; dim_F={}]", self.map.spec().name, self.splitting.dim_f())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn log_lu() -> f64 {
        ((3.0 + 5f64.sqrt()) / 2.0).ln()
    }

    #[test]
    fn cat_spectrum_matches_eigenvalues() {
        let r = lyapunov_spectrum(&Diffeo::Cat, &TorusPoint::new(&[0.3, 0.7]), 2000, 1).unwrap();
        assert_abs_diff_eq!(r.exponents[0], 0.962_423_650_119_206_9, epsilon = 1e-6);
        assert_abs_diff_eq!(r.exponents[1], -0.962_423_650_119_206_9, epsilon = 1e-6);
        assert_abs_diff_eq!(r.exponents.iter().sum::<f64>(), r.mean_log_det, epsilon = 1e-8);
    }

    #[test]
    fn identity_spectrum_is_zero() {
        let r = lyapunov_spectrum(&Diffeo::Identity { dim: 3 }, &TorusPoint::origin(3), 50, 5).unwrap();
        assert_eq!(r.exponents, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn cat_frame_matches_eigenvectors() {
        let (frame, _) = estimate_frame(&Diffeo::Cat, &TorusPoint::new(&[0.1, 0.2]), 40, 1).unwrap();
        let exact = SplittingField::cat().frame_at(&TorusPoint::origin(2)).unwrap();
        assert!(subspace_distance(&frame.basis_f, &exact.basis_f) < 1e-8);
        assert!(subspace_distance(&frame.basis_e, &exact.basis_e) < 1e-8);
    }

    #[test]
    fn identity_splitting_is_not_resolvable() {
        let err = estimate_frame(&Diffeo::Identity { dim: 2 }, &TorusPoint::origin(2), 40, 1).unwrap_err();
        assert!(matches!(err, DomlabError::SplittingNotResolvable { .. }));
    }

    #[test]
    fn cat_domination_slope() {
        let pts: Vec<TorusPoint> = (0..8).map(|i| TorusPoint::new(&[0.1 * i as f64, 0.37])).collect();
        let fit = domination_fit(&Diffeo::Cat, &SplittingField::cat(), &pts, 20).unwrap();
        assert_abs_diff_eq!(fit.slope, -2.0 * log_lu(), epsilon = 1e-9);
        assert_abs_diff_eq!(fit.c, 1.0, epsilon = 1e-6);
        assert!(fit.dominated);
    }

    #[test]
    fn cat_psi_is_constant() {
        let s = SplittingField::cat();
        let x = TorusPoint::new(&[0.4, 0.9]);
        assert_abs_diff_eq!(psi(&Diffeo::Cat, &s, &x).unwrap(), -log_lu(), epsilon = 1e-12);
        assert_abs_diff_eq!(psi_n(&Diffeo::Cat, &s, &x, 10).unwrap(), -10.0 * log_lu(), epsilon = 1e-10);
        assert_eq!(psi_n(&Diffeo::Cat, &s, &x, 0).unwrap(), 0.0);
    }

    #[test]
    fn sampled_lookup_uses_nearest_sample() {
        let pts = vec![TorusPoint::new(&[0.2, 0.2]), TorusPoint::new(&[0.9995, 0.5])];
        let field = oseledets_splitting(&Diffeo::Cat, &pts, 40, 1).unwrap();
        let q = TorusPoint::new(&[0.0002, 0.5003]);
        assert_eq!(field.frame_at(&q).unwrap(), field.samples()[1].frame);
        assert!(field.equivariance_residual().unwrap() < 1e-10);
    }
}
