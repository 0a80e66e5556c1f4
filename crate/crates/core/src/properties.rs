//! Invariant and property checks across all modules, aggregated into one
//! report. Each check records the worst observed violation and its
//! tolerance.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{
    domination_profile, dominant_singular_subspace, lyapunov_spectrum, oseledets_splitting, PsiEvaluator,
    SplittingField, SplittingPsi,
};
use crate::dynamics::{Diffeo, TorusPoint};
use crate::entropy::{
    itinerary_distribution, pesin_gap, shannon_inequalities_check, EntropyParams, GridPartition, PesinParams,
};
use crate::error::Result;
use crate::graphs::{
    graph_transform_detailed, iterate_transform, leaf_volume, make_graph, measured_chart_radius,
    scale_to_dispersion, transform_checks, ChartFrame, GraphRecipe, RECURSION_SLACK,
};
use crate::measures::{
    basin_sweep, empirical_measure, lebesgue_psi_integral, EmpiricalMeasure, LebesgueSample, Measure,
    TestFunctionFamily, WeakStarMetric,
};
use crate::numeric::subspace_distance;
use crate::rng::{component_rng, indexed_rng};

#[derive(Clone, Debug, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub module: &'static str,
    /// Largest violation seen (0 when the property held with room to spare).
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub passed: bool,
    pub detail: String,
}

impl PropertyCheck {
    fn new(name: &str, module: &'static str, worst: f64, tolerance: f64, cases: usize, detail: String) -> Self {
        PropertyCheck {
            name: name.to_string(),
            module,
            passed: worst <= tolerance,
            worst,
            tolerance,
            cases,
            detail,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&PropertyCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn find(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOptions {
    pub seed: u64,
    pub round_trip_points: usize,
    pub measure_pairs: usize,
    pub shannon_trials: usize,
    pub cocycle_points: usize,
    pub graphs: usize,
    pub graph_steps: usize,
    pub grid_nodes: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            round_trip_points: 1000,
            measure_pairs: 100,
            shannon_trials: 100,
            cocycle_points: 100,
            graphs: 50,
            graph_steps: 10,
            grid_nodes: 33,
        }
    }
}

fn catalog() -> Vec<Diffeo> {
    vec![
        Diffeo::Identity { dim: 2 },
        Diffeo::Identity { dim: 3 },
        Diffeo::Cat,
        Diffeo::PerturbedCat { eps: 0.05 },
        Diffeo::CatCircle { kappa: 0.3 },
    ]
}

/// Catalog maps that carry a dominated splitting, with `dim F = 1`.
fn dominated_catalog() -> Vec<Diffeo> {
    vec![Diffeo::Cat, Diffeo::PerturbedCat { eps: 0.05 }, Diffeo::CatCircle { kappa: 0.3 }]
}

fn random_point(rng: &mut impl Rng, d: usize) -> TorusPoint {
    TorusPoint::new(&(0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>())
}

fn random_measure(rng: &mut impl Rng, d: usize) -> Result<EmpiricalMeasure> {
    let k = rng.random_range(1..=8);
    EmpiricalMeasure::from_atoms((0..k).map(|_| (random_point(rng, d), rng.random::<f64>() + 0.01)).collect())
}

pub fn dynamics_checks(opts: &SuiteOptions) -> Vec<PropertyCheck> {
    let mut out = Vec::new();
    let mut rt_worst = 0.0f64;
    let mut chain_worst = 0.0f64;
    let mut cases = 0;
    for (i, map) in catalog().iter().enumerate() {
        let mut rng = indexed_rng(opts.seed, "property_round_trip", i as u64);
        for _ in 0..opts.round_trip_points {
            let x = random_point(&mut rng, map.dim());
            rt_worst = rt_worst.max(map.apply_inverse(&map.apply(&x)).distance(&x));
            let direct = map.jacobian_power(&x, 2);
            let product = map.jacobian_at(map.apply(&x).coords()) * map.jacobian_at(x.coords());
            chain_worst = chain_worst.max((direct - product).abs().max());
            cases += 1;
        }
    }
    out.push(PropertyCheck::new("round_trip", "dynamics", rt_worst, 1e-12, cases, "f^-1(f(x)) = x over the catalog".into()));
    out.push(PropertyCheck::new("chain_rule", "dynamics", chain_worst, 1e-10, cases, "df^2(x) = df(f x) df(x)".into()));
    let det = Diffeo::Cat.jacobian(&TorusPoint::new(&[0.2, 0.9])).determinant();
    out.push(PropertyCheck::new("cat_determinant", "dynamics", (det - 1.0).abs(), 0.0, 1, format!("det = {det}")));
    out
}

pub fn cocycle_checks(opts: &SuiteOptions) -> Result<Vec<PropertyCheck>> {
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for map in catalog() {
        let x = TorusPoint::new(&vec![0.137; map.dim()]);
        let r = lyapunov_spectrum(&map, &x, 500, 1)?;
        let sum: f64 = r.exponents.iter().sum();
        worst = worst.max((sum - r.mean_log_det).abs());
    }
    out.push(PropertyCheck::new(
        "exponent_sum_log_det",
        "cocycle",
        worst,
        1e-8,
        catalog().len(),
        "sum of QR exponents against the mean of log|det df|".into(),
    ));

    let s = SplittingField::cat();
    let profile = domination_profile(&Diffeo::Cat, &s, &TorusPoint::new(&[0.3, 0.4]), 30)?;
    let lambda_s = (3.0 - 5f64.sqrt()) / 2.0;
    let logs: Vec<f64> = profile.iter().map(|(e, f)| (e * f).ln()).collect();
    let decay = logs.windows(2).map(|w| (w[1] - w[0] - 2.0 * lambda_s.ln()).abs()).fold(0.0, f64::max);
    out.push(PropertyCheck::new("cat_product_decay", "cocycle", decay, 1e-10, logs.len() - 1, "log-product steps equal 2 log λ_s".into()));

    let mut psi_worst = 0.0f64;
    let mut psi_cases = 0;
    for (i, map) in dominated_catalog().iter().enumerate() {
        let field = SplittingField::for_map(map, 1)?;
        let psi = SplittingPsi::new(map, &field);
        let per_point: Vec<f64> = (0..opts.cocycle_points)
            .into_par_iter()
            .map(|k| {
                let mut rng = indexed_rng(opts.seed, &format!("property_psi_cocycle_{i}"), k as u64);
                let x = random_point(&mut rng, map.dim());
                let n = rng.random_range(1..=50);
                let m = rng.random_range(1..=50);
                let lhs = psi.orbit_sum(&x, n + m)?;
                let rhs = psi.orbit_sum(&x, n)? + psi.orbit_sum(&map.iterate(&x, n), m)?;
                Ok((lhs - rhs).abs())
            })
            .collect::<Result<_>>()?;
        psi_cases += per_point.len();
        psi_worst = per_point.into_iter().fold(psi_worst, f64::max);
    }
    out.push(PropertyCheck::new(
        "psi_cocycle",
        "cocycle",
        psi_worst,
        1e-10,
        psi_cases,
        "ψ_{n+m}(x) = ψ_n(x) + ψ_m(f^n x), n, m ≤ 50".into(),
    ));

    let x = TorusPoint::new(&[0.21, 0.83]);
    let pts: Vec<TorusPoint> = (0..=40).map(|k| Diffeo::Cat.iterate(&x, k)).collect();
    let field = oseledets_splitting(&Diffeo::Cat, &pts[40..], 60, 1)?;
    let svd = dominant_singular_subspace(&Diffeo::Cat, &x, 40, 1);
    let angle = subspace_distance(&field.basis_f(&pts[40])?, &svd);
    out.push(PropertyCheck::new("oseledets_vs_svd", "cocycle", angle, 1e-6, 1, "F against the top singular subspace of df^40".into()));
    Ok(out)
}

pub fn measure_checks(opts: &SuiteOptions) -> Result<Vec<PropertyCheck>> {
    let mut out = Vec::new();
    let map = Diffeo::PerturbedCat { eps: 0.05 };
    let field = SplittingField::for_map(&map, 1)?;
    let psi = SplittingPsi::new(&map, &field);
    let family = TestFunctionFamily::new(2, 16)?;
    let metric = WeakStarMetric::new(&family, Some(&psi));
    let mut rng = component_rng(opts.seed, "property_metric");
    let triples: Vec<[Measure; 3]> = (0..opts.measure_pairs)
        .map(|_| {
            Ok([0, 1, 2].map(|_| Measure::Atomic { measure: random_measure(&mut rng, 2).expect("positive weights") }))
        })
        .collect::<Result<_>>()?;
    let results: Vec<(f64, f64, f64, f64)> = triples
        .par_iter()
        .map(|[a, b, c]| {
            let (sa, sb, sc) = (metric.signature(a)?, metric.signature(b)?, metric.signature(c)?);
            let ab = metric.signature_distance(&sa, &sb);
            let ba = metric.signature_distance(&sb, &sa);
            let tri = ab - (metric.signature_distance(&sa, &sc) + metric.signature_distance(&sc, &sb));
            let self_d = metric.signature_distance(&sa, &sa);
            // Ball convexity around c with r = max distance of a, b.
            let r = metric.signature_distance(&sa, &sc).max(metric.signature_distance(&sb, &sc));
            let (Measure::Atomic { measure: ma }, Measure::Atomic { measure: mb }) = (a, b) else { unreachable!() };
            let mut conv = 0.0f64;
            for t in [0.1, 0.25, 0.5, 0.75, 0.9] {
                let mix = Measure::Atomic { measure: ma.mix(mb, t)? };
                conv = conv.max(metric.signature_distance(&metric.signature(&mix)?, &sc) - r);
            }
            Ok(((ab - ba).abs(), tri.max(0.0), self_d, conv.max(0.0)))
        })
        .collect::<Result<_>>()?;
    let n = results.len();
    let fold = |f: fn(&(f64, f64, f64, f64)) -> f64| results.iter().map(f).fold(0.0, f64::max);
    out.push(PropertyCheck::new("dist_symmetry", "measures", fold(|r| r.0), 0.0, n, "dist*(μ,ν) = dist*(ν,μ) exactly".into()));
    out.push(PropertyCheck::new("dist_triangle", "measures", fold(|r| r.1), 1e-12, n, "triangle inequality".into()));
    out.push(PropertyCheck::new("dist_zero_self", "measures", fold(|r| r.2), 1e-12, n, "dist*(μ,μ) = 0".into()));
    out.push(PropertyCheck::new("ball_convexity", "measures", fold(|r| r.3), 1e-12, n * 5, "convex combinations stay in the ball".into()));

    let mut worst_split = 0usize;
    let mut cases = 0;
    for (i, m) in dominated_catalog().iter().enumerate() {
        let mut rng = indexed_rng(opts.seed, "property_empirical_split", i as u64);
        for _ in 0..20 {
            let x = random_point(&mut rng, m.dim());
            let (n1, n2) = (rng.random_range(1..=60), rng.random_range(1..=60));
            let whole = empirical_measure(m, &x, n1 + n2)?;
            let head = empirical_measure(m, &x, n1)?;
            let tail = empirical_measure(m, &m.iterate(&x, n1), n2)?;
            let parts = head.combine(n1 as f64, &tail, n2 as f64)?;
            if !whole.approx_eq_ulps(&parts, 4) {
                worst_split += 1;
            }
            cases += 1;
        }
    }
    out.push(PropertyCheck::new(
        "empirical_split",
        "measures",
        worst_split as f64,
        0.0,
        cases,
        "σ_{n+m,x} = (n σ_{n,x} + m σ_{m,f^n x})/(n+m), same atoms, weights within 4 ulp".into(),
    ));

    let cat_field = SplittingField::cat();
    let cat_psi = SplittingPsi::new(&Diffeo::Cat, &cat_field);
    let cat_metric = WeakStarMetric::new(&family, Some(&cat_psi));
    let sample = LebesgueSample::grid(2, 24)?;
    let sweep = basin_sweep(&Diffeo::Cat, &Measure::Lebesgue { dim: 2 }, &[20, 80], &sample, &cat_metric)?;
    let eps = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01];
    let mut increases = 0.0f64;
    for j in 0..sweep.ns.len() {
        let f: Vec<f64> = eps.iter().map(|e| sweep.fraction(j, *e)).collect();
        increases = f.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(increases, f64::max);
    }
    out.push(PropertyCheck::new("basin_monotone", "measures", increases, 0.0, eps.len() * sweep.ns.len(), "basin fraction nonincreasing as eps shrinks".into()));
    Ok(out)
}

pub fn entropy_checks(opts: &SuiteOptions) -> Result<Vec<PropertyCheck>> {
    let mut out = Vec::new();
    let partition = GridPartition::with_cells(2, 8)?;
    let mut rng = component_rng(opts.seed, "property_entropy");
    let make_sample = |rng: &mut crate::rng::LabRng, n: usize| -> Vec<(TorusPoint, f64)> {
        (0..n).map(|_| (random_point(rng, 2), 1.0)).collect()
    };
    let mut refine = 0.0f64;
    let mut cap = 0.0f64;
    let mut concave = 0.0f64;
    let mut cases = 0;
    for map in [Diffeo::Cat, Diffeo::PerturbedCat { eps: 0.05 }] {
        let s1 = make_sample(&mut rng, 4000);
        let s2 = make_sample(&mut rng, 3000);
        let mut prev: Option<f64> = None;
        for q in 0..=5 {
            let d1 = itinerary_distribution(&map, &s1, &partition, q)?;
            let d2 = itinerary_distribution(&map, &s2, &partition, q)?;
            let h1 = d1.entropy();
            if let Some(p) = prev {
                refine = refine.max(p - h1);
            }
            prev = Some(h1);
            cap = cap.max(h1 - (d1.distinct() as f64).ln());
            let w = 0.3;
            let mixed = d1.mix(&d2, w);
            concave = concave.max(w * h1 + (1.0 - w) * d2.entropy() - mixed.entropy());
            cases += 1;
        }
    }
    out.push(PropertyCheck::new("refinement_monotone", "entropy", refine.max(0.0), 0.0, cases, "H(α^{q+1}) ≥ H(α^q)".into()));
    out.push(PropertyCheck::new("entropy_cap", "entropy", cap.max(0.0), 0.0, cases, "H ≤ log #words".into()));
    out.push(PropertyCheck::new("mixture_concavity", "entropy", concave.max(0.0), 1e-12, cases, "H(mixture) ≥ convex combination".into()));

    let shannon = shannon_inequalities_check(opts.seed, opts.shannon_trials, 8);
    let worst = shannon.min_slack.iter().map(|(_, s)| (-s).max(0.0)).fold(0.0, f64::max);
    out.push(PropertyCheck::new(
        "shannon_suite",
        "entropy",
        worst,
        1e-12,
        shannon.checks,
        "subadditivity, refinement, concavity and cardinality cap on random joints".into(),
    ));

    let params = PesinParams {
        entropy: EntropyParams { partition: GridPartition::with_cells(2, 8)?, q_max: 4, miller_madow: false, strict: false },
        lebesgue_per_axis: 200,
        exponent_per_axis: 4,
        lyapunov_n: 500,
    };
    let mut chi_order = 0.0f64;
    let mut psi_chi = 0.0f64;
    for map in [Diffeo::Cat, Diffeo::PerturbedCat { eps: 0.05 }] {
        let field = SplittingField::for_map(&map, 1)?;
        let r = pesin_gap(&map, &field, &Measure::Lebesgue { dim: 2 }, &params)?;
        chi_order = chi_order.max(r.sum_chi_f - r.sum_chi_plus);
        let psi = SplittingPsi::new(&map, &field);
        let (int_psi, _) = lebesgue_psi_integral(&psi, 2, 64)?;
        let chi1 = lyapunov_spectrum(&map, &TorusPoint::new(&[0.31, 0.77]), 20000, 1)?.exponents[0];
        psi_chi = psi_chi.max((int_psi + chi1).abs());
    }
    out.push(PropertyCheck::new("chi_f_below_chi_plus", "entropy", chi_order.max(0.0), 0.0, 2, "Σχ_F ≤ Σχ⁺".into()));
    out.push(PropertyCheck::new("psi_integral_exponent", "entropy", psi_chi, 1e-3, 2, "∫ψ dLeb = −χ₁ for area-preserving maps".into()));
    Ok(out)
}

/// Worst values of the graph-transform checks over seeded graphs.
#[derive(Clone, Debug, Serialize)]
pub struct GraphSuiteReport {
    pub graphs: usize,
    pub steps: usize,
    /// `max(disp G_n − rhs_n)` over all graphs and steps.
    pub recursion_excess: f64,
    /// Largest `|disp G_n − rhs_n|` for linear-slope graphs under the cat map.
    pub linear_equality_gap: f64,
    pub u1_variation: f64,
    pub inverse_identity_residual: f64,
    pub leaf_image_error: f64,
    pub leaf_volume_excess: f64,
    pub chart_radius: Vec<(String, f64)>,
}

impl GraphSuiteReport {
    pub fn recursion_holds(&self) -> bool {
        self.recursion_excess <= RECURSION_SLACK && self.linear_equality_gap <= 1e-6
    }

    pub fn formulas_hold(&self) -> bool {
        self.u1_variation < 1e-8 && self.inverse_identity_residual <= 1e-4 && self.leaf_image_error <= 1e-3
    }
}

/// Base point, dispersion and seed of the `k`-th seeded graph.
pub fn seeded_graph_spec(seed: u64, k: usize, count: usize) -> (TorusPoint, f64, u64) {
    let mut rng = indexed_rng(seed, "seeded_graph", k as u64);
    let x = random_point(&mut rng, 2);
    let disp = 0.3 * (k + 1) as f64 / count.max(1) as f64;
    (x, disp, rng.random())
}

/// Half the graphs over the cat map and half over the perturbed cat map,
/// dispersions spread over `(0, 0.3]`; plus slope graphs `0.1, 0.2, 0.3`
/// for the linear equality.
pub fn graph_suite(seed: u64, graphs: usize, steps: usize, nodes: usize) -> Result<GraphSuiteReport> {
    let maps = [Diffeo::Cat, Diffeo::PerturbedCat { eps: 0.05 }];
    let fields: Vec<SplittingField> = maps.iter().map(|m| SplittingField::for_map(m, 1)).collect::<Result<_>>()?;
    let radii: Vec<f64> = maps.iter().map(|m| measured_chart_radius(m, 1e-3, seed)).collect();
    let per_graph: Vec<[f64; 5]> = (0..graphs)
        .into_par_iter()
        .map(|k| {
            let which = k % 2;
            let (map, field, r) = (&maps[which], &fields[which], radii[which]);
            let (x, disp, gseed) = seeded_graph_spec(seed, k, graphs);
            let chart = ChartFrame::from_splitting(field, &x, r)?;
            let raw = make_graph(chart, GraphRecipe::RandomSmooth { seed: gseed, amplitude: 0.01 }, nodes)?;
            let g = scale_to_dispersion(&raw, disp)?;
            let trace = iterate_transform(map, field, &g, steps)?;
            let excess = trace.steps.iter().map(|s| s.disp.value - s.bound_rhs).fold(f64::MIN, f64::max);
            let target = ChartFrame::from_splitting(field, &map.apply(&x), r)?;
            let (g1, _) = graph_transform_detailed(map, &g, &target)?;
            let c = transform_checks(map, &g, &g1)?;
            let vol = leaf_volume(&g, &[0.0])?;
            Ok([excess, c.u1_variation, c.inverse_identity_residual, c.leaf_image_error, (vol.volume - vol.bound).max(0.0)])
        })
        .collect::<Result<_>>()?;
    let worst = |i: usize| per_graph.iter().map(|r| r[i]).fold(if i == 0 { f64::MIN } else { 0.0 }, f64::max);
    let mut linear_gap = 0.0f64;
    for slope in [0.1, 0.2, 0.3] {
        let chart = ChartFrame::from_splitting(&fields[0], &TorusPoint::new(&[0.3, 0.6]), radii[0])?;
        let g = make_graph(chart, GraphRecipe::Linear { slope }, nodes)?;
        linear_gap = linear_gap.max(iterate_transform(&maps[0], &fields[0], &g, steps)?.max_equality_gap());
    }
    Ok(GraphSuiteReport {
        graphs,
        steps,
        recursion_excess: worst(0),
        linear_equality_gap: linear_gap,
        u1_variation: worst(1),
        inverse_identity_residual: worst(2),
        leaf_image_error: worst(3),
        leaf_volume_excess: worst(4),
        chart_radius: vec![("cat".into(), radii[0]), ("perturbed_cat".into(), radii[1])],
    })
}

pub fn graph_checks(opts: &SuiteOptions) -> Result<Vec<PropertyCheck>> {
    let r = graph_suite(opts.seed, opts.graphs, opts.graph_steps, opts.grid_nodes)?;
    let n = r.graphs;
    Ok(vec![
        PropertyCheck::new("transform_consistency", "graphs", r.leaf_image_error, 1e-3, n, "transformed leaves against direct images".into()),
        PropertyCheck::new(
            "dispersion_recursion",
            "graphs",
            r.recursion_excess.max(0.0),
            RECURSION_SLACK,
            n * r.steps,
            "disp G_n ≤ ‖df^n|E‖ disp G ‖df^-n|F‖ + slack".into(),
        ),
        PropertyCheck::new("linear_recursion_equality", "graphs", r.linear_equality_gap, 1e-6, 3, "slope graphs under the cat map".into()),
        PropertyCheck::new("inverse_identity", "graphs", r.inverse_identity_residual, 1e-4, n, "∂u₂/∂v₂ · df^-1|F = Id".into()),
        PropertyCheck::new("u1_independence", "graphs", r.u1_variation, 1e-8, n, "u₁ does not depend on the starting v₂".into()),
        PropertyCheck::new("leaf_volume_bound", "graphs", r.leaf_volume_excess, 0.0, n, "(2δ)^dimF (1 + disp)^dimF".into()),
    ])
}

/// Runs every check.
pub fn run_property_suite(opts: &SuiteOptions) -> Result<PropertyReport> {
    let mut checks = dynamics_checks(opts);
    checks.extend(cocycle_checks(opts)?);
    checks.extend(measure_checks(opts)?);
    checks.extend(entropy_checks(opts)?);
    checks.extend(graph_checks(opts)?);
    Ok(PropertyReport { seed: opts.seed, checks })
}
