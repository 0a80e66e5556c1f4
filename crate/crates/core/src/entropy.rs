//! Partition entropy along itineraries, the Shannon-inequality suite and the
//! diagnostics that compare entropy with Lyapunov exponents.
//!
//! Itinerary words of every sample point are stored in one flat buffer and
//! sorted once; equal prefixes are then contiguous, so `H(α^q)` for every
//! `q ≤ q_max` comes out of a single scan.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{lyapunov_spectrum, PsiEvaluator, SplittingField, SplittingPsi};
use crate::dynamics::{Diffeo, TorusPoint};
use crate::error::{DomlabError, Result};
use crate::measures::{lebesgue_psi_integral, LebesgueSample, Measure, WeakStarMetric};
use crate::numeric::pairwise_sum;
use crate::rng::component_rng;

/// Largest number of cells a partition may have.
pub const MAX_CELLS: u64 = 1 << 30;
/// Distinct-word fraction above which an estimate is flagged as biased.
pub const BIAS_FRACTION: f64 = 0.1;
/// Distinct-word fraction above which undersampling is severe.
pub const SEVERE_FRACTION: f64 = 0.5;

/// Half-open boxes of side `1/k` shifted by a fixed irrational fraction of
/// a cell on each axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPartition {
    pub dim: usize,
    pub cells_per_axis: usize,
    /// Diameter bound `√d / k` in the torus sup metric's Euclidean cover.
    pub diameter: f64,
    pub origin: Vec<f64>,
}

fn partition_origin(dim: usize, k: usize) -> Vec<f64> {
    [7f64.sqrt(), 11f64.sqrt(), 13f64.sqrt()][..dim]
        .iter()
        .map(|s| (s - s.floor()) / k as f64)
        .collect()
}

impl GridPartition {
    pub fn with_cells(dim: usize, k: usize) -> Result<GridPartition> {
        if k == 0 || !(2..=3).contains(&dim) {
            return Err(DomlabError::Config(format!("partition needs d in {{2,3}} and k >= 1 (got d={dim}, k={k})")));
        }
        let cells = (k as u64).checked_pow(dim as u32).unwrap_or(u64::MAX);
        if cells > MAX_CELLS {
            return Err(DomlabError::Resource(format!("{k}^{dim} cells exceed the budget of {MAX_CELLS}")));
        }
        Ok(GridPartition {
            dim,
            cells_per_axis: k,
            diameter: (dim as f64).sqrt() / k as f64,
            origin: partition_origin(dim, k),
        })
    }

    pub fn cell_count(&self) -> u64 {
        (self.cells_per_axis as u64).pow(self.dim as u32)
    }

    pub fn cell(&self, x: &TorusPoint) -> u32 {
        let k = self.cells_per_axis;
        let mut code = 0u64;
        for (c, o) in x.coords().iter().zip(&self.origin) {
            let shifted = (c - o).rem_euclid(1.0);
            let idx = ((shifted * k as f64) as usize).min(k - 1);
            code = code * k as u64 + idx as u64;
        }
        code as u32
    }
}

/// Smallest `k` with `√d / k < delta`.
pub fn make_partition(dim: usize, delta: f64) -> Result<GridPartition> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(DomlabError::Config(format!("partition scale must be positive, got {delta}")));
    }
    let k = ((dim as f64).sqrt() / delta).floor() + 1.0;
    if k > MAX_CELLS as f64 {
        return Err(DomlabError::Resource(format!("delta = {delta:e} needs too many cells")));
    }
    GridPartition::with_cells(dim, k as usize)
}

/// Itinerary words of a weighted sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItineraryDistribution {
    pub word_length: usize,
    /// Distinct words in sorted order.
    pub words: Vec<Vec<u32>>,
    /// Probability of each word.
    pub weights: Vec<f64>,
    pub samples: usize,
}

impl ItineraryDistribution {
    pub fn distinct(&self) -> usize {
        self.words.len()
    }

    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.weights)
    }

    /// `w·self + (1 − w)·other` as a word distribution.
    pub fn mix(&self, other: &ItineraryDistribution, w: f64) -> ItineraryDistribution {
        let mut all: Vec<(Vec<u32>, f64)> = self
            .words
            .iter()
            .cloned()
            .zip(self.weights.iter().map(|p| w * p))
            .chain(other.words.iter().cloned().zip(other.weights.iter().map(|p| (1.0 - w) * p)))
            .collect();
        all.sort_by(|a, b| a.0.cmp(&b.0));
        let mut words: Vec<Vec<u32>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (word, p) in all {
            if words.last() == Some(&word) {
                *weights.last_mut().unwrap() += p;
            } else {
                words.push(word);
                weights.push(p);
            }
        }
        ItineraryDistribution { word_length: self.word_length, words, weights, samples: self.samples + other.samples }
    }
}

/// `−Σ p log p` in natural log; zero entries contribute nothing.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    let terms: Vec<f64> = p.iter().filter(|v| **v > 0.0).map(|v| -v * v.ln()).collect();
    pairwise_sum(&terms)
}

pub fn partition_entropy(dist: &ItineraryDistribution) -> f64 {
    dist.entropy()
}

/// Words of length `q_max + 1` for each sample point, sorted, with the
/// permutation that sorted them.
struct WordTable {
    len: usize,
    buf: Vec<u32>,
    order: Vec<usize>,
    weights: Vec<f64>,
}

impl WordTable {
    fn build(map: &Diffeo, sample: &[(TorusPoint, f64)], partition: &GridPartition, q_max: usize) -> Result<WordTable> {
        if sample.is_empty() {
            return Err(DomlabError::Config("itinerary sample is empty".into()));
        }
        if partition.dim != map.dim() {
            return Err(DomlabError::Config("partition and map dimensions differ".into()));
        }
        let total = pairwise_sum(&sample.iter().map(|s| s.1).collect::<Vec<_>>());
        if !(total > 0.0) || sample.iter().any(|s| !(s.1 >= 0.0)) {
            return Err(DomlabError::Config("sample weights must be nonnegative with positive sum".into()));
        }
        let len = q_max + 1;
        let mut buf = vec![0u32; sample.len() * len];
        buf.par_chunks_mut(len).zip(sample.par_iter()).for_each(|(word, (x, _))| {
            let mut p = *x;
            for (j, slot) in word.iter_mut().enumerate() {
                *slot = partition.cell(&p);
                if j + 1 < len {
                    p = map.apply(&p);
                }
            }
        });
        let mut order: Vec<usize> = (0..sample.len()).collect();
        order.par_sort_by(|&a, &b| buf[a * len..(a + 1) * len].cmp(&buf[b * len..(b + 1) * len]));
        let weights = sample.iter().map(|s| s.1 / total).collect();
        Ok(WordTable { len, buf, order, weights })
    }

    fn word(&self, i: usize) -> &[u32] {
        let s = self.order[i];
        &self.buf[s * self.len..(s + 1) * self.len]
    }

    /// Group boundaries for prefixes of length `q + 1`, as `(start, end)`.
    fn groups(&self, q: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..self.order.len() {
            if self.word(i)[..=q] != self.word(i - 1)[..=q] {
                out.push((start, i));
                start = i;
            }
        }
        out.push((start, self.order.len()));
        out
    }

    fn group_weights(&self, q: usize) -> Vec<f64> {
        self.groups(q)
            .into_iter()
            .map(|(a, b)| pairwise_sum(&self.order[a..b].iter().map(|&s| self.weights[s]).collect::<Vec<_>>()))
            .collect()
    }

    fn distribution(&self, q: usize) -> ItineraryDistribution {
        let groups = self.groups(q);
        ItineraryDistribution {
            word_length: q + 1,
            words: groups.iter().map(|&(a, _)| self.word(a)[..=q].to_vec()).collect(),
            weights: self.group_weights(q),
            samples: self.order.len(),
        }
    }
}

/// Distribution of words `(cell(x), cell(f x), …, cell(f^q x))`.
pub fn itinerary_distribution(
    map: &Diffeo,
    support_sample: &[(TorusPoint, f64)],
    partition: &GridPartition,
    q: usize,
) -> Result<ItineraryDistribution> {
    Ok(WordTable::build(map, support_sample, partition, q)?.distribution(q))
}

#[derive(Clone, Debug)]
pub struct EntropyParams {
    pub partition: GridPartition,
    pub q_max: usize,
    /// Add the Miller–Madow term `(K − 1)/(2N)`.
    pub miller_madow: bool,
    /// Turn severe undersampling into an error instead of a warning.
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyRow {
    pub q: usize,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "H_over_q")]
    pub h_over_q: Option<f64>,
    pub distinct_words: usize,
    pub samples: usize,
    pub bias_flag: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyRate {
    /// `(H(α^{q_max}) − H(α^0)) / q_max`.
    pub h_estimate: f64,
    pub q_max: usize,
    pub rows: Vec<EntropyRow>,
    pub partition: GridPartition,
    pub miller_madow: bool,
    pub severe_undersampling: bool,
    pub warnings: Vec<String>,
}

impl EntropyRate {
    /// Columns `q, H, H_over_q, distinct_words, samples, bias_flag`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| DomlabError::Resource(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["q", "H", "H_over_q", "distinct_words", "samples", "bias_flag"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.q.to_string(),
                format!("{:.17e}", r.h),
                r.h_over_q.map(|v| format!("{v:.17e}")).unwrap_or_default(),
                r.distinct_words.to_string(),
                r.samples.to_string(),
                r.bias_flag.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| DomlabError::Resource(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

/// Plug-in entropies `H(α^q)` for `q = 0..=q_max` and the rate estimate
/// `(H(α^{q_max}) − H(α^0)) / q_max`. Subtracting the `q = 0` term removes
/// the partition's own entropy, which otherwise dominates at small `q`.
pub fn entropy_rate(map: &Diffeo, sample: &[(TorusPoint, f64)], params: &EntropyParams) -> Result<EntropyRate> {
    if params.q_max < 2 {
        return Err(DomlabError::Config("entropy rate needs q_max >= 2".into()));
    }
    let table = WordTable::build(map, sample, &params.partition, params.q_max)?;
    let n = sample.len();
    let mut rows = Vec::with_capacity(params.q_max + 1);
    let mut warnings = Vec::new();
    let mut severe = false;
    for q in 0..=params.q_max {
        let weights = table.group_weights(q);
        let k = weights.len();
        let mut h = shannon_entropy(&weights);
        if params.miller_madow {
            h += (k as f64 - 1.0) / (2.0 * n as f64);
        }
        let fraction = k as f64 / n as f64;
        if fraction > SEVERE_FRACTION && !severe {
            severe = true;
            if params.strict {
                return Err(DomlabError::Undersampled { distinct: k, samples: n });
            }
            warnings.push(format!(
                "severe undersampling from q={q}: {k} distinct words for {n} samples"
            ));
        }
        rows.push(EntropyRow {
            q,
            h,
            h_over_q: (q > 0).then(|| h / q as f64),
            distinct_words: k,
            samples: n,
            bias_flag: fraction > BIAS_FRACTION,
        });
    }
    let h_estimate = (rows[params.q_max].h - rows[0].h) / params.q_max as f64;
    Ok(EntropyRate {
        h_estimate,
        q_max: params.q_max,
        rows,
        partition: params.partition.clone(),
        miller_madow: params.miller_madow,
        severe_undersampling: severe,
        warnings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ShannonWitness {
    pub inequality: &'static str,
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShannonReport {
    pub trials: usize,
    pub tolerance: f64,
    pub checks: usize,
    /// Smallest `rhs − lhs` seen per inequality (negative means violated).
    pub min_slack: Vec<(&'static str, f64)>,
    pub violations: Vec<ShannonWitness>,
}

impl ShannonReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random::<f64>().powi(3) })
        .collect();
    let total: f64 = pairwise_sum(&raw);
    if total == 0.0 {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        return v;
    }
    raw.iter().map(|v| v / total).collect()
}

/// Checks subadditivity, refinement monotonicity, concavity and the
/// log-cardinality cap on `trials` random joint distributions of size at
/// most `max_size × max_size`.
pub fn shannon_inequalities_check(seed: u64, trials: usize, max_size: usize) -> ShannonReport {
    const TOL: f64 = 1e-12;
    let mut rng = component_rng(seed, "shannon_suite");
    let mut slack = [
        ("subadditivity", f64::INFINITY),
        ("refinement_monotonicity", f64::INFINITY),
        ("concavity", f64::INFINITY),
        ("cardinality_cap", f64::INFINITY),
    ];
    let mut violations = Vec::new();
    let mut checks = 0;
    let mut record = |idx: usize, trial: usize, lhs: f64, rhs: f64, slack: &mut [(&'static str, f64); 4]| {
        let s = rhs - lhs;
        slack[idx].1 = slack[idx].1.min(s);
        if s < -TOL {
            violations.push(ShannonWitness { inequality: slack[idx].0, trial, lhs, rhs });
        }
    };
    for trial in 0..trials {
        let a = rng.random_range(1..=max_size.max(1));
        let b = rng.random_range(1..=max_size.max(1));
        let joint = random_distribution(&mut rng, a * b);
        let row: Vec<f64> = (0..a).map(|i| pairwise_sum(&joint[i * b..(i + 1) * b])).collect();
        let col: Vec<f64> = (0..b).map(|j| pairwise_sum(&(0..a).map(|i| joint[i * b + j]).collect::<Vec<_>>())).collect();
        let (hj, ha, hb) = (shannon_entropy(&joint), shannon_entropy(&row), shannon_entropy(&col));
        record(0, trial, hj, ha + hb, &mut slack);
        record(1, trial, ha, hj, &mut slack);
        let other = random_distribution(&mut rng, a * b);
        let w: f64 = rng.random();
        let mixed: Vec<f64> = joint.iter().zip(&other).map(|(p, q)| w * p + (1.0 - w) * q).collect();
        record(2, trial, w * hj + (1.0 - w) * shannon_entropy(&other), shannon_entropy(&mixed), &mut slack);
        record(3, trial, ha, (a as f64).ln(), &mut slack);
        record(3, trial, hj, ((a * b) as f64).ln(), &mut slack);
        checks += 5;
    }
    ShannonReport { trials, tolerance: TOL, checks, min_slack: slack.to_vec(), violations }
}

#[derive(Clone, Debug)]
pub struct PesinParams {
    pub entropy: EntropyParams,
    /// Grid points per axis of the Lebesgue sample used for entropy.
    pub lebesgue_per_axis: usize,
    /// Grid points per axis at which exponents are averaged for Lebesgue.
    pub exponent_per_axis: usize,
    pub lyapunov_n: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PesinGapReport {
    pub h_estimate: f64,
    pub sum_chi_f: f64,
    pub sum_chi_plus: f64,
    /// `h − ∫ Σ_{i ≤ dim F} χ_i dμ`; negative values violate the entropy
    /// lower bound.
    pub gap_theorem: f64,
    /// `∫ Σ χ_i⁺ dμ − h`; negative values would contradict Ruelle's bound.
    pub ruelle_residual: f64,
    pub int_psi: f64,
    /// `h + ∫ψ dμ`, reported with its sign; not asserted to be nonnegative.
    pub h_plus_int_psi: f64,
    pub dim_f: usize,
    pub measure: String,
    pub entropy: EntropyRate,
    pub diagnostics: PesinDiagnostics,
}

#[derive(Clone, Debug, Serialize)]
pub struct PesinDiagnostics {
    pub cells_per_axis: usize,
    pub q: usize,
    pub entropy_samples: usize,
    pub exponent_points: usize,
    pub lyapunov_n: usize,
    pub psi_quadrature_error: f64,
}

/// Weighted sample representing `μ` for entropy estimation.
pub fn measure_sample(mu: &Measure, lebesgue_per_axis: usize) -> Result<Vec<(TorusPoint, f64)>> {
    match mu {
        Measure::Lebesgue { dim } => {
            let g = LebesgueSample::grid(*dim, lebesgue_per_axis)?;
            let w = 1.0 / g.len() as f64;
            Ok(g.points().iter().map(|p| (*p, w)).collect())
        }
        Measure::Atomic { measure } => Ok(measure.atoms().to_vec()),
    }
}

/// Entropy and exponent integrals of `μ` side by side.
pub fn pesin_gap(map: &Diffeo, splitting: &SplittingField, mu: &Measure, params: &PesinParams) -> Result<PesinGapReport> {
    if mu.dim() != map.dim() || splitting.dim() != map.dim() {
        return Err(DomlabError::Config("measure, splitting and map dimensions differ".into()));
    }
    let sample = measure_sample(mu, params.lebesgue_per_axis)?;
    let entropy = entropy_rate(map, &sample, &params.entropy)?;
    let points: Vec<(TorusPoint, f64)> = match mu {
        Measure::Lebesgue { dim } => {
            let g = LebesgueSample::grid(*dim, params.exponent_per_axis)?;
            let w = 1.0 / g.len() as f64;
            g.points().iter().map(|p| (*p, w)).collect()
        }
        Measure::Atomic { measure } => measure.atoms().to_vec(),
    };
    let dim_f = splitting.dim_f();
    let sums: Vec<(f64, f64)> = points
        .par_iter()
        .map(|(x, w)| {
            let r = lyapunov_spectrum(map, x, params.lyapunov_n, 1)?;
            let f: f64 = r.exponents[..dim_f].iter().fold(0.0, |a, c| a + c);
            let plus: f64 = r.exponents.iter().fold(0.0, |a, c| a + c.max(0.0));
            Ok((w * f, w * plus))
        })
        .collect::<Result<_>>()?;
    let sum_chi_f = pairwise_sum(&sums.iter().map(|s| s.0).collect::<Vec<_>>());
    let sum_chi_plus = pairwise_sum(&sums.iter().map(|s| s.1).collect::<Vec<_>>());
    let psi = SplittingPsi::new(map, splitting);
    let (int_psi, psi_err) = integrate_psi(&psi, mu)?;
    let h = entropy.h_estimate;
    Ok(PesinGapReport {
        h_estimate: h,
        sum_chi_f,
        sum_chi_plus,
        gap_theorem: h - sum_chi_f,
        ruelle_residual: sum_chi_plus - h,
        int_psi,
        h_plus_int_psi: h + int_psi,
        dim_f,
        measure: mu.describe(),
        diagnostics: PesinDiagnostics {
            cells_per_axis: params.entropy.partition.cells_per_axis,
            q: params.entropy.q_max,
            entropy_samples: sample.len(),
            exponent_points: points.len(),
            lyapunov_n: params.lyapunov_n,
            psi_quadrature_error: psi_err,
        },
        entropy,
    })
}

/// `∫ψ dμ` with its quadrature error estimate.
pub fn integrate_psi(psi: &dyn PsiEvaluator, mu: &Measure) -> Result<(f64, f64)> {
    match mu {
        Measure::Lebesgue { dim } => lebesgue_psi_integral(psi, *dim, if *dim == 3 { 16 } else { 64 }),
        Measure::Atomic { measure } => {
            let vals: Vec<f64> =
                measure.atoms().iter().map(|(x, w)| psi.psi(x).map(|v| w * v)).collect::<Result<_>>()?;
            Ok((pairwise_sum(&vals), 0.0))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub eps: f64,
    pub ns: Vec<usize>,
    pub fractions: Vec<f64>,
    /// `(1/n) log fraction`; `None` stands for `−∞` (empty `C_n(ε)`).
    pub rates: Vec<Option<f64>>,
    /// Maximum over the schedule; `None` when every fraction is zero.
    pub limsup: Option<f64>,
    pub empty_flags: Vec<bool>,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateBoundReport {
    pub rhs: f64,
    pub h_estimate: f64,
    pub int_psi: f64,
    pub tolerance: f64,
    pub rows: Vec<RateRow>,
    pub holds: bool,
    pub measure: String,
    pub metric: &'static str,
}

/// Compares `(1/n) log m(C_n(ε))` with `h + ∫ψ dμ` over an `n` schedule and
/// a decreasing `eps` list.
#[allow(clippy::too_many_arguments)]
pub fn rate_bound_check(
    map: &Diffeo,
    splitting: &SplittingField,
    mu: &Measure,
    eps_list: &[f64],
    ns: &[usize],
    sample: &LebesgueSample,
    metric: &WeakStarMetric,
    h_estimate: f64,
    tolerance: f64,
) -> Result<RateBoundReport> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(DomlabError::Config("eps schedule must be nonempty and decreasing".into()));
    }
    let psi = SplittingPsi::new(map, splitting);
    let (int_psi, _) = integrate_psi(&psi, mu)?;
    let rhs = h_estimate + int_psi;
    let sweep = crate::measures::basin_sweep(map, mu, ns, sample, metric)?;
    let rows: Vec<RateRow> = eps_list
        .iter()
        .map(|&eps| {
            let fractions = sweep.fractions(eps);
            let rates: Vec<Option<f64>> = fractions
                .iter()
                .zip(ns)
                .map(|(f, n)| (*f > 0.0).then(|| f.ln() / *n as f64))
                .collect();
            let limsup = rates.iter().flatten().copied().reduce(f64::max);
            RateRow {
                eps,
                ns: ns.to_vec(),
                empty_flags: fractions.iter().map(|f| *f == 0.0).collect(),
                holds: limsup.is_none_or(|l| l <= rhs + tolerance),
                fractions,
                rates,
                limsup,
            }
        })
        .collect();
    Ok(RateBoundReport {
        rhs,
        h_estimate,
        int_psi,
        tolerance,
        holds: rows.iter().all(|r| r.holds),
        rows,
        measure: mu.describe(),
        metric: metric.label(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OscillationReport {
    pub n: usize,
    pub eps: f64,
    pub bound: f64,
    pub max_difference: f64,
    pub pairs: usize,
    pub delta1: f64,
    pub cells_per_axis: usize,
    pub holds: bool,
}

/// Largest `r = 2^{−j}` such that sampled pairs at distance `≤ r` have
/// `|ψ(x) − ψ(y)| < target`.
pub fn psi_modulus_radius(psi: &dyn PsiEvaluator, dim: usize, target: f64, seed: u64) -> Result<f64> {
    if psi.constant().is_some() {
        return Ok(0.5);
    }
    let mut rng = component_rng(seed, "psi_modulus");
    for j in 1..40 {
        let r = 0.5f64.powi(j);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let x = TorusPoint::new(&(0..dim).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-r..=r)).collect();
            worst = worst.max((psi.psi(&x)? - psi.psi(&x.translate(&v))?).abs());
        }
        if worst < target {
            return Ok(r);
        }
    }
    Err(DomlabError::Numerical("no radius meets the modulus target".into()))
}

/// Samples pairs with identical `α^n` words and compares `|ψ_n(y) − ψ_n(x)|`
/// with `n·eps/5`. The partition scale `δ₁` is chosen from the measured
/// modulus of continuity of `ψ` at level `eps/5`.
pub fn oscillation_check(
    map: &Diffeo,
    splitting: &SplittingField,
    n: usize,
    eps: f64,
    pairs: usize,
    seed: u64,
) -> Result<OscillationReport> {
    let psi = SplittingPsi::new(map, splitting);
    let dim = map.dim();
    let delta1 = psi_modulus_radius(&psi, dim, eps / 5.0, seed)?;
    let partition = make_partition(dim, delta1)?;
    let bound = n as f64 * eps / 5.0;
    if n == 0 {
        return Ok(OscillationReport {
            n, eps, bound, max_difference: 0.0, pairs: 0, delta1,
            cells_per_axis: partition.cells_per_axis, holds: true,
        });
    }
    let word = |x: &TorusPoint| -> Vec<u32> {
        let mut p = *x;
        (0..=n)
            .map(|j| {
                let c = partition.cell(&p);
                if j < n {
                    p = map.apply(&p);
                }
                c
            })
            .collect()
    };
    let mut rng = component_rng(seed, "oscillation_pairs");
    let mut found: Vec<(TorusPoint, TorusPoint)> = Vec::with_capacity(pairs);
    let mut attempts = 0usize;
    while found.len() < pairs && attempts < pairs * 200 {
        attempts += 1;
        let x = TorusPoint::new(&(0..dim).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
        let scale = 10f64.powf(rng.random_range(-14.0..delta1.log10()));
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-scale..=scale)).collect();
        let y = x.translate(&v);
        if word(&x) == word(&y) {
            found.push((x, y));
        }
    }
    let diffs: Vec<f64> = found
        .par_iter()
        .map(|(x, y)| Ok((psi.orbit_sum(y, n)? - psi.orbit_sum(x, n)?).abs()))
        .collect::<Result<_>>()?;
    let max_difference = diffs.into_iter().fold(0.0, f64::max);
    Ok(OscillationReport {
        n,
        eps,
        bound,
        max_difference,
        pairs: found.len(),
        delta1,
        cells_per_axis: partition.cells_per_axis,
        holds: max_difference <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sizes() {
        assert_eq!(make_partition(2, 0.05).unwrap().cells_per_axis, 29);
        assert_eq!(make_partition(2, 2.0).unwrap().cells_per_axis, 1);
        assert_eq!(make_partition(3, 0.2).unwrap().cells_per_axis, 9);
        assert!(matches!(make_partition(3, 1e-6), Err(DomlabError::Resource(_))));
    }

    #[test]
    fn entropy_of_simple_distributions() {
        assert_eq!(shannon_entropy(&[1.0]), 0.0);
        assert!((shannon_entropy(&[0.125; 8]) - 8f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn identity_words_are_constant() {
        let p = GridPartition::with_cells(2, 4).unwrap();
        let g = LebesgueSample::grid(2, 8).unwrap();
        let sample: Vec<_> = g.points().iter().map(|x| (*x, 1.0)).collect();
        let d = itinerary_distribution(&Diffeo::Identity { dim: 2 }, &sample, &p, 3).unwrap();
        assert_eq!(d.distinct(), 16);
        assert!(d.words.iter().all(|w| w.iter().all(|s| *s == w[0])));
    }

    #[test]
    fn independent_uniform_cells_are_additive() {
        let u = [0.25; 4];
        let joint = [1.0 / 16.0; 16];
        assert!((shannon_entropy(&joint) - 2.0 * shannon_entropy(&u)).abs() < 1e-15);
    }

    #[test]
    fn shannon_suite_passes() {
        let r = shannon_inequalities_check(1, 100, 12);
        assert!(r.passed(), "{:?}", r.violations);
    }
}
