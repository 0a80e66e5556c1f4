//! Acceptance run: one PASS/FAIL line per criterion, then a single assert.
//! Lines go straight to stderr so they show without `--nocapture`.

use std::io::Write;
use std::time::Instant;

use domlab::cli::{execute, ExperimentConfig, Scenario};
use domlab::cocycle::{assess_domination, domination_fit, lyapunov_spectrum, SplittingField, SplittingPsi};
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::entropy::{pesin_gap, rate_bound_check, EntropyParams, GridPartition, PesinGapReport, PesinParams};
use domlab::measures::{srb_like_score, LebesgueSample, Measure, TestFunctionFamily, WeakStarMetric};
use domlab::properties::{cocycle_checks, entropy_checks, graph_suite, measure_checks, GraphSuiteReport, SuiteOptions};

fn chi() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

struct Line {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn grid_points(k: usize) -> Vec<TorusPoint> {
    (0..k * k)
        .map(|i| TorusPoint::new(&[((i % k) as f64 + 0.414) / k as f64, ((i / k) as f64 + 0.732) / k as f64]))
        .collect()
}

fn pesin_params() -> PesinParams {
    PesinParams {
        entropy: EntropyParams {
            partition: GridPartition::with_cells(2, 16).unwrap(),
            q_max: 8,
            miller_madow: false,
            strict: false,
        },
        lebesgue_per_axis: 1000,
        exponent_per_axis: 16,
        lyapunov_n: 2000,
    }
}

fn lyapunov_fidelity() -> Line {
    let t = Instant::now();
    let r = lyapunov_spectrum(&Diffeo::Cat, &TorusPoint::new(&[0.1, 0.2]), 2000, 1).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let err = (r.exponents[0] - chi()).abs().max((r.exponents[1] + chi()).abs());
    Line {
        id: 1,
        name: "lyapunov fidelity",
        passed: err <= 1e-6 && secs < 1.0,
        detail: format!("max error {err:.2e}, {secs:.3}s"),
    }
}

fn domination_constants() -> Line {
    let points = grid_points(8);
    let fit = domination_fit(&Diffeo::Cat, &SplittingField::cat(), &points, 20).unwrap();
    let expected = 2.0 * ((3.0 - 5f64.sqrt()) / 2.0).ln();
    let identity = assess_domination(&Diffeo::Identity { dim: 2 }, 1, &points, 20).unwrap();
    Line {
        id: 2,
        name: "domination constants",
        passed: (fit.slope - expected).abs() <= 1e-3 && (0.9..=1.1).contains(&fit.c) && fit.dominated && !identity.dominated,
        detail: format!("slope {:.6}, C {:.6}, identity: {}", fit.slope, fit.c, identity.verdict),
    }
}

fn pesin_equality(report: &PesinGapReport, secs: f64) -> Line {
    let h_err = (report.h_estimate - chi()).abs();
    Line {
        id: 3,
        name: "entropy formula, cat + Lebesgue",
        passed: h_err <= 0.1 && report.gap_theorem.abs() <= 0.1 && secs < 60.0,
        detail: format!("h {:.4}, gap {:+.4}, {secs:.1}s", report.h_estimate, report.gap_theorem),
    }
}

fn dirac_mechanism() -> Line {
    let origin = Measure::dirac(TorusPoint::origin(2));
    let r = pesin_gap(&Diffeo::Cat, &SplittingField::cat(), &origin, &pesin_params()).unwrap();
    let field = SplittingField::cat();
    let psi = SplittingPsi::new(&Diffeo::Cat, &field);
    let family = TestFunctionFamily::new(2, 16).unwrap();
    let metric = WeakStarMetric::new(&family, Some(&psi));
    let grid = LebesgueSample::grid(2, 64).unwrap();
    let score = srb_like_score(&Diffeo::Cat, &origin, 0.05, &[50], &grid, &metric).unwrap();
    let terminal = *score.fractions.last().unwrap();
    Line {
        id: 4,
        name: "dirac at the fixed point",
        passed: (r.gap_theorem + chi()).abs() <= 1e-6 && terminal <= 1.0 / 4096.0 && !score.candidate,
        detail: format!("gap {:.9}, terminal fraction {terminal}", r.gap_theorem),
    }
}

fn rate_bound(h_lebesgue: f64) -> Line {
    let field = SplittingField::cat();
    let psi = SplittingPsi::new(&Diffeo::Cat, &field);
    let family = TestFunctionFamily::new(2, 16).unwrap();
    let metric = WeakStarMetric::new(&family, Some(&psi));
    let grid = LebesgueSample::grid(2, 64).unwrap();
    let ns = [50, 100, 200, 400];
    let mut passed = true;
    let mut detail = Vec::new();
    for (label, mu, h) in [
        ("lebesgue", Measure::Lebesgue { dim: 2 }, h_lebesgue),
        ("dirac", Measure::dirac(TorusPoint::origin(2)), 0.0),
    ] {
        let r = rate_bound_check(&Diffeo::Cat, &field, &mu, &[0.05], &ns, &grid, &metric, h, 0.05).unwrap();
        let worst = r.rows[0].rates.iter().flatten().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        passed &= r.holds && worst <= r.rhs + 0.05;
        detail.push(format!("{label}: max rate {worst:.4} vs rhs {:+.4}", r.rhs));
    }
    Line { id: 5, name: "rate bound", passed, detail: detail.join("; ") }
}

fn dispersion_recursion(suite: &GraphSuiteReport) -> Line {
    Line {
        id: 6,
        name: "dispersion recursion",
        passed: suite.recursion_holds(),
        detail: format!("excess {:.2e} (<= 2e-3), linear gap {:.2e} (<= 1e-6)", suite.recursion_excess, suite.linear_equality_gap),
    }
}

fn formula_checks(suite: &GraphSuiteReport) -> Line {
    Line {
        id: 7,
        name: "graph-transform formulas",
        passed: suite.formulas_hold(),
        detail: format!(
            "u1 {:.1e}, inverse {:.1e}, leaf image {:.1e}",
            suite.u1_variation, suite.inverse_identity_residual, suite.leaf_image_error
        ),
    }
}

fn property_suites() -> Line {
    let opts = SuiteOptions { seed: 8, ..SuiteOptions::default() };
    let mut checks = measure_checks(&opts).unwrap();
    checks.extend(entropy_checks(&opts).unwrap());
    checks.extend(cocycle_checks(&opts).unwrap());
    let wanted = [
        ("dist_symmetry", 1e-12),
        ("dist_triangle", 1e-12),
        ("dist_zero_self", 1e-12),
        ("ball_convexity", 1e-12),
        ("shannon_suite", 1e-12),
        ("psi_cocycle", 1e-10),
    ];
    let mut passed = true;
    let mut detail = Vec::new();
    for (name, tol) in wanted {
        match checks.iter().find(|c| c.name == name) {
            Some(c) => {
                passed &= c.passed && c.worst <= tol;
                detail.push(format!("{name} {:.1e}", c.worst));
            }
            None => {
                passed = false;
                detail.push(format!("{name} missing"));
            }
        }
    }
    Line { id: 8, name: "metric and entropy properties", passed, detail: detail.join(", ") }
}

fn determinism() -> Line {
    let configs = [
        (Scenario::Lyapunov, "map = perturbed_cat\n"),
        (Scenario::Dominate, "map = perturbed_cat\n"),
        (Scenario::Entropy, "samples_per_axis = 200\nq = 5\n"),
        (Scenario::PesinGap, "samples_per_axis = 200\nq = 5\nexponent_per_axis = 4\n"),
        (Scenario::SrbLike, "grid = 24\nns = 10,50\n"),
        (Scenario::RateBound, "grid = 24\nsamples_per_axis = 200\nq = 5\nns = 50,100\n"),
        (Scenario::GraphTransform, "map = perturbed_cat\nseed = 5\n"),
        (Scenario::BasinSweep, "grid = 24\neps_list = 0.1,0.05\nns = 10,50,100\n"),
        (Scenario::PropertySuite, "graphs = 4\ngraph_steps = 3\nround_trip_points = 100\nmeasure_pairs = 20\nshannon_trials = 20\ncocycle_points = 20\n"),
    ];
    let mut mismatched = Vec::new();
    for (scenario, text) in configs {
        let cfg = ExperimentConfig::parse(text, scenario).unwrap();
        let one = execute(&cfg, Some(1)).unwrap();
        let eight = execute(&cfg, Some(8)).unwrap();
        if one.report_json() != eight.report_json() || one.files != eight.files || one.report.error.is_some() {
            mismatched.push(scenario.name());
        }
    }
    Line {
        id: 9,
        name: "determinism, 1 vs 8 workers",
        passed: mismatched.is_empty(),
        detail: if mismatched.is_empty() { "9 scenarios byte-identical".into() } else { format!("differs: {mismatched:?}") },
    }
}

#[test]
fn acceptance() {
    let mut lines = vec![lyapunov_fidelity(), domination_constants()];

    let t = Instant::now();
    let lebesgue = pesin_gap(&Diffeo::Cat, &SplittingField::cat(), &Measure::Lebesgue { dim: 2 }, &pesin_params()).unwrap();
    lines.push(pesin_equality(&lebesgue, t.elapsed().as_secs_f64()));
    lines.push(dirac_mechanism());
    lines.push(rate_bound(lebesgue.h_estimate));

    let suite = graph_suite(2024, 50, 10, 33).unwrap();
    lines.push(dispersion_recursion(&suite));
    lines.push(formula_checks(&suite));
    lines.push(property_suites());
    lines.push(determinism());

    let mut err = std::io::stderr().lock();
    for l in &lines {
        writeln!(
            err,
            "criterion {}: {} - {} ({})", l.id, if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail
        )
        .unwrap();
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.passed).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
