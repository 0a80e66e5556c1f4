//! One function per scenario: reads knobs, calls the library, returns a
//! JSON payload, warnings and CSV files (kept in memory until written).

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, Scenario};
use crate::cocycle::{assess_domination, lyapunov_spectrum_with, LyapunovOptions, SplittingField, SplittingPsi};
use crate::dynamics::{Diffeo, TorusPoint};
use crate::entropy::{entropy_rate, measure_sample, pesin_gap, rate_bound_check, EntropyParams, GridPartition, PesinParams};
use crate::error::{DomlabError, Result};
use crate::graphs::{
    graph_transform_detailed, iterate_transform, jacobian_ratio_check, leaf_volume, make_graph,
    measure_constants, measured_chart_radius, scale_to_dispersion, transform_checks, ChartFrame, GraphRecipe,
};
use crate::measures::{basin_sweep, irrational_offsets, score_from_sweep, LebesgueSample, Measure, TestFunctionFamily, WeakStarMetric};
use crate::properties::{run_property_suite, SuiteOptions};
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub payload: Value,
    pub warnings: Vec<String>,
    pub files: Vec<OutputFile>,
    /// False when an assertion scenario found a violated check.
    pub passed: bool,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| DomlabError::Resource(format!("serialization failed: {e}")))
}

fn csv_file(name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<OutputFile> {
    let mut bytes = Vec::new();
    write(&mut bytes)?;
    Ok(OutputFile { name: name.to_string(), bytes })
}

fn output(payload: Value, warnings: Vec<String>, files: Vec<OutputFile>) -> ScenarioOutput {
    ScenarioOutput { payload, warnings, files, passed: true }
}

fn measure(cfg: &ExperimentConfig, dim: usize) -> Result<Measure> {
    match cfg.str("measure")? {
        "dirac" => Ok(Measure::dirac(cfg.point("atom", dim)?)),
        _ => Ok(Measure::Lebesgue { dim }),
    }
}

fn sample(cfg: &ExperimentConfig, dim: usize) -> Result<LebesgueSample> {
    match cfg.str("sample")? {
        "halton" => LebesgueSample::halton(dim, cfg.usize("halton_count")?, derive_seed(cfg.seed()?, "halton")),
        _ => LebesgueSample::grid(dim, cfg.usize("grid")?),
    }
}

fn entropy_params(cfg: &ExperimentConfig, dim: usize) -> Result<EntropyParams> {
    Ok(EntropyParams {
        partition: GridPartition::with_cells(dim, cfg.usize("k_axis")?)?,
        q_max: cfg.usize("q")?,
        miller_madow: cfg.bool("miller_madow")?,
        strict: cfg.bool("strict")?,
    })
}

/// Sample points `(i + offset)/k` on a `k^d` grid.
fn shifted_grid(dim: usize, k: usize) -> Vec<TorusPoint> {
    let off = irrational_offsets();
    (0..k.pow(dim as u32))
        .map(|mut idx| {
            let c: Vec<f64> = (0..dim)
                .map(|ax| {
                    let i = idx % k;
                    idx /= k;
                    (i as f64 + off[ax]) / k as f64
                })
                .collect();
            TorusPoint::new(&c)
        })
        .collect()
}

pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let map = cfg.map()?;
    match cfg.scenario {
        Scenario::Lyapunov => lyapunov(cfg, &map),
        Scenario::Dominate => dominate(cfg, &map),
        Scenario::Entropy => entropy(cfg, &map),
        Scenario::PesinGap => pesin(cfg, &map),
        Scenario::SrbLike => srb_like(cfg, &map),
        Scenario::RateBound => rate_bound(cfg, &map),
        Scenario::GraphTransform => graph_transform(cfg, &map),
        Scenario::BasinSweep => basin(cfg, &map),
        Scenario::PropertySuite => property_suite(cfg),
    }
}

fn lyapunov(cfg: &ExperimentConfig, map: &Diffeo) -> Result<ScenarioOutput> {
    let x0 = cfg.point("x0", map.dim())?;
    let opts = LyapunovOptions { n: cfg.usize("n")?, reorth_every: cfg.usize("reorth_every")?, transient: cfg.usize("transient")? };
    let report = lyapunov_spectrum_with(map, &x0, &opts)?;
    Ok(output(json!({ "map": to_value(&map.spec())?, "lyapunov": to_value(&report)? }), vec![], vec![]))
}

fn dominate(cfg: &ExperimentConfig, map: &Diffeo) -> Result<ScenarioOutput> {
    let points = shifted_grid(map.dim(), cfg.usize("points_per_axis")?);
    let a = assess_domination(map, cfg.usize("dim_f")?, &points, cfg.usize("n_max")?)?;
    let mut warnings = Vec::new();
    if let Some(e) = &a.splitting_error {
        warnings.push(format!("splitting not resolvable, coordinate axes used: {e}"));
    }
    let fit = &a.fit;
    let file = csv_file("domination.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let io = |e: csv::Error| DomlabError::Resource(format!("csv write failed: {e}"));
        w.write_record(["n", "worst_log_product", "fitted"]).map_err(io)?;
        for (i, v) in fit.worst_log_product.iter().enumerate() {
            let n = (i + 1) as f64;
            w.write_record([(i + 1).to_string(), format!("{v:.17e}"), format!("{:.17e}", fit.intercept + fit.slope * n)])
                .map_err(io)?;
        }
        w.flush().map_err(|e| DomlabError::Resource(e.to_string()))
    })?;
    Ok(output(json!({ "map": to_value(&map.spec())?, "domination": to_value(&a)? }), warnings, vec![file]))
}

fn entropy(cfg: &ExperimentConfig, map: &Diffeo) -> Result<ScenarioOutput> {
    let mu = measure(cfg, map.dim())?;
    let pts = measure_sample(&mu, cfg.usize("samples_per_axis")?)?;
    let rate = entropy_rate(map, &pts, &entropy_params(cfg, map.dim())?)?;
    let file = csv_file("entropy.csv", |buf| rate.write_csv(buf))?;
    Ok(output(
        json!({ "map": to_value(&map.spec())?, "measure": mu.describe(), "entropy": to_value(&rate)? }),
        rate.warnings.clone(),
        vec![file],
    ))
}

fn pesin(cfg: &ExperimentConfig, map: &Diffeo) -> Result<ScenarioOutput> {
    let mu = measure(cfg, map.dim())?;
    let field = SplittingField::for_map(map, cfg.usize("dim_f")?)?;
    let params = PesinParams {
        entropy: entropy_params(cfg, map.dim())?,
        lebesgue_per_axis: cfg.usize("samples_per_axis")?,
        exponent_per_axis: cfg.usize("exponent_per_axis")?,
        lyapunov_n: cfg.usize("lyapunov_n")?,
    };
    let report = pesin_gap(map, &field, &mu, &params)?;
    let file = csv_file("entropy.csv", |buf| report.entropy.write_csv(buf))?;
    Ok(output(json!({ "map": to_value(&map.spec())?, "pesin_gap": to_value(&report)? }), report.entropy.warnings.clone(), vec![file]))
}

struct MetricParts {
    family: TestFunctionFamily,
    field: Option<SplittingField>,
}

impl MetricParts {
    fn new(cfg: &ExperimentConfig, map: &Diffeo) -> Result<MetricParts> {
        let family = TestFunctionFamily::new(map.dim(), cfg.usize("n_trunc")?)?;
        let field = if cfg.bool("psi")? { Some(SplittingField::for_map(map, cfg.usize("dim_f")?)?) } else { None };
        Ok(MetricParts { family, field })
    }
}

fn srb_like(cfg: &ExperimentConfig, map: &Diffeo) -> Result<ScenarioOutput> {
    let mu = measure(cfg, map.dim())?;
    let parts = MetricParts::new(cfg, map)?;
    let psi = parts.field.as_ref().map(|f| SplittingPsi::new(map, f));
    let metric = WeakStarMetric::new(&parts.family, psi.as_ref().map(|p| p as _));
    let s = sample(cfg, map.dim())?;
    let eps = cfg.f64("eps")?;
    let sweep = basin_sweep(map, &mu, &cfg.usize_list("ns")?, &s, &metric)?;
    let score = score_from_sweep(&sweep, eps, 1.0 / s.len() as f64, &s);
    let file = csv_file("basin.csv", |buf| sweep.write_csv(buf, &[eps]))?;
    Ok(output(
        json!({ "map": to_value(&map.spec())?, "measure": mu.describe(), "metric": metric.label(), "srb_like": to_value(&score)? }),
        vec![],
        vec![file],
    ))
}

fn rate_bound(cfg: &ExperimentConfig, map: &Diffeo) -> Result<ScenarioOutput> {
    let mu = measure(cfg, map.dim())?;
    let field = SplittingField::for_map(map, cfg.usize("dim_f")?)?;
    let pts = measure_sample(&mu, cfg.usize("samples_per_axis")?)?;
    let rate = entropy_rate(map, &pts, &entropy_params(cfg, map.dim())?)?;
    let family = TestFunctionFamily::new(map.dim(), cfg.usize("n_trunc")?)?;
    let psi = SplittingPsi::new(map, &field);
    let metric = WeakStarMetric::new(&family, if cfg.bool("psi")? { Some(&psi) } else { None });
    let s = sample(cfg, map.dim())?;
    let report = rate_bound_check(
        map,
        &field,
        &mu,
        &cfg.f64_list("eps_list")?,
        &cfg.usize_list("ns")?,
        &s,
        &metric,
        rate.h_estimate,
        cfg.f64("tolerance")?,
    )?;
    let file = csv_file("rate_bound.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let io = |e: csv::Error| DomlabError::Resource(format!("csv write failed: {e}"));
        w.write_record(["eps", "n", "fraction", "rate"]).map_err(io)?;
        for row in &report.rows {
            for ((n, f), r) in row.ns.iter().zip(&row.fractions).zip(&row.rates) {
                let rate = r.map(|v| format!("{v:.17e}")).unwrap_or_else(|| "-inf".into());
                w.write_record([row.eps.to_string(), n.to_string(), format!("{f:.17e}"), rate]).map_err(io)?;
            }
        }
        w.flush().map_err(|e| DomlabError::Resource(e.to_string()))
    })?;
    let mut warnings = rate.warnings.clone();
    if !report.holds {
        warnings.push("rate bound exceeded".into());
    }
    Ok(output(
        json!({ "map": to_value(&map.spec())?, "entropy": to_value(&rate)?, "rate_bound": to_value(&report)? }),
        warnings,
        vec![file],
    ))
}

fn graph_transform(cfg: &ExperimentConfig, map: &Diffeo) -> Result<ScenarioOutput> {
    let field = SplittingField::for_map(map, cfg.usize("dim_f")?)?;
    let seed = cfg.seed()?;
    let tol = cfg.f64("nonlinearity_tol")?;
    let delta = match cfg.f64_or_auto("delta")? {
        Some(d) => d,
        None => measured_chart_radius(map, tol, seed),
    };
    let x = cfg.point("x0", map.dim())?;
    let chart = ChartFrame::from_splitting(&field, &x, delta)?;
    let nodes = cfg.usize("nodes")?;
    let graph = match cfg.str("recipe")? {
        "zero" => make_graph(chart, GraphRecipe::Zero, nodes)?,
        "linear" => make_graph(chart, GraphRecipe::Linear { slope: cfg.f64("slope")? }, nodes)?,
        "bilinear" => make_graph(chart, GraphRecipe::Bilinear { a: cfg.f64("bilinear_a")? }, nodes)?,
        _ => {
            let raw = make_graph(chart, GraphRecipe::RandomSmooth { seed: derive_seed(seed, "graph-transform"), amplitude: 0.01 }, nodes)?;
            scale_to_dispersion(&raw, cfg.f64("disp")?)?
        }
    };
    let steps = cfg.usize("steps")?;
    let trace = iterate_transform(map, &field, &graph, steps)?;
    let target = ChartFrame::from_splitting(&field, &map.apply(&x), delta)?;
    let (first, diagnostics) = graph_transform_detailed(map, &graph, &target)?;
    let checks = transform_checks(map, &graph, &first)?;
    let ratio = jacobian_ratio_check(map, &field, &trace, cfg.f64("ratio_eps")?)?;
    let volume = leaf_volume(&graph, &vec![0.0; graph.dim_e()])?;
    let constants = measure_constants(map, &field, &shifted_grid(map.dim(), 3), steps.max(3), tol)?;
    let mut warnings = Vec::new();
    if !trace.holds() {
        warnings.push("dispersion recursion exceeded its bound at some step".into());
    }
    if !ratio.holds {
        warnings.push("Jacobian ratio left its band after n0".into());
    }
    let last = trace.graphs.last().expect("trace has the initial graph");
    let files = vec![
        csv_file("dispersion.csv", |buf| trace.write_csv(buf))?,
        csv_file("graph_initial.csv", |buf| graph.write_csv(buf))?,
        csv_file("graph_final.csv", |buf| last.write_csv(buf))?,
    ];
    Ok(output(
        json!({
            "map": to_value(&map.spec())?,
            "chart_radius": delta,
            "initial": to_value(&graph.summary())?,
            "steps": to_value(&trace.steps)?,
            "recursion_holds": trace.holds(),
            "first_below_initial": trace.first_below_initial,
            "first_transform": to_value(&diagnostics)?,
            "formula_checks": to_value(&checks)?,
            "jacobian_ratio": to_value(&ratio)?,
            "leaf_volume": to_value(&volume)?,
            "constants": to_value(&constants)?,
        }),
        warnings,
        files,
    ))
}

fn basin(cfg: &ExperimentConfig, map: &Diffeo) -> Result<ScenarioOutput> {
    let mu = measure(cfg, map.dim())?;
    let parts = MetricParts::new(cfg, map)?;
    let psi = parts.field.as_ref().map(|f| SplittingPsi::new(map, f));
    let metric = WeakStarMetric::new(&parts.family, psi.as_ref().map(|p| p as _));
    let s = sample(cfg, map.dim())?;
    let eps_list = cfg.f64_list("eps_list")?;
    let sweep = basin_sweep(map, &mu, &cfg.usize_list("ns")?, &s, &metric)?;
    let fractions: Vec<Value> = eps_list
        .iter()
        .map(|e| json!({ "eps": e, "fractions": sweep.fractions(*e) }))
        .collect();
    let file = csv_file("basin.csv", |buf| sweep.write_csv(buf, &eps_list))?;
    Ok(output(
        json!({
            "map": to_value(&map.spec())?,
            "measure": mu.describe(),
            "metric": metric.label(),
            "sample": s.describe(),
            "ns": sweep.ns,
            "fractions": fractions,
        }),
        vec![],
        vec![file],
    ))
}

fn property_suite(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let opts = SuiteOptions {
        seed: cfg.seed()?,
        round_trip_points: cfg.usize("round_trip_points")?,
        measure_pairs: cfg.usize("measure_pairs")?,
        shannon_trials: cfg.usize("shannon_trials")?,
        cocycle_points: cfg.usize("cocycle_points")?,
        graphs: cfg.usize("graphs")?,
        graph_steps: cfg.usize("graph_steps")?,
        grid_nodes: cfg.usize("nodes")?,
    };
    let report = run_property_suite(&opts)?;
    let warnings = report.failures().iter().map(|c| format!("property {} failed: worst {:e} > {:e}", c.name, c.worst, c.tolerance)).collect();
    let passed = report.passed();
    Ok(ScenarioOutput { payload: json!({ "options": to_value(&opts)?, "suite": to_value(&report)? }), warnings, files: vec![], passed })
}
