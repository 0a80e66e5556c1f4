use domlab::cli::{ExperimentConfig, Scenario};
use domlab::cocycle::{psi_n, SplittingField};
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::entropy::shannon_entropy;
use domlab::measures::{weak_star_distance, EmpiricalMeasure, Measure, TestFunctionFamily};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = TorusPoint> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| TorusPoint::new(&[x, y]))
}

fn map() -> impl Strategy<Value = Diffeo> {
    prop_oneof![Just(Diffeo::Cat), (-0.1..0.1f64).prop_map(|eps| Diffeo::PerturbedCat { eps })]
}

fn measure() -> impl Strategy<Value = Measure> {
    prop::collection::vec((point(), 0.01..1.0f64), 1..6).prop_map(|atoms| Measure::Atomic {
        measure: EmpiricalMeasure::from_atoms(atoms).unwrap(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_round_trip(f in map(), x in point()) {
        let y = f.apply_inverse(&f.apply(&x));
        prop_assert!(y.distance(&x) < 1e-12);
    }

    #[test]
    fn maps_preserve_area(f in map(), x in point()) {
        prop_assert!((f.jacobian_at(x.coords()).determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn torus_distance_is_a_metric(a in point(), b in point(), c in point()) {
        prop_assert_eq!(a.distance(&b), b.distance(&a));
        prop_assert!(a.distance(&c) <= a.distance(&b) + b.distance(&c) + 1e-15);
        prop_assert!(a.distance(&b) <= 0.5);
    }

    #[test]
    fn psi_sum_is_additive(x in point(), m in 1usize..6, n in 1usize..6) {
        let f = Diffeo::PerturbedCat { eps: 0.05 };
        let field = SplittingField::for_map(&f, 1).unwrap();
        let lhs = psi_n(&f, &field, &x, m + n).unwrap();
        let rhs = psi_n(&f, &field, &x, m).unwrap() + psi_n(&f, &field, &f.iterate(&x, m), n).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn distance_axioms(a in measure(), b in measure(), c in measure()) {
        let fam = TestFunctionFamily::new(2, 8).unwrap();
        let d = |p: &Measure, q: &Measure| weak_star_distance(p, q, &fam, None).unwrap().value;
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &a) <= 1e-12);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn shannon_bounds(w in prop::collection::vec(0.0..1.0f64, 1..40)) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 1e-9);
        let p: Vec<f64> = w.iter().map(|v| v / total).collect();
        let h = shannon_entropy(&p);
        prop_assert!(h >= -1e-15);
        prop_assert!(h <= (p.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn config_round_trips_through_canonical_text(seed in any::<u64>(), n in 1usize..100_000) {
        let text = format!("seed = {seed}\nn = {n}\n");
        let cfg = ExperimentConfig::parse(&text, Scenario::Lyapunov).unwrap();
        let canonical = cfg.canonical_text();
        let body = canonical.split_once('\n').unwrap().1;
        let again = ExperimentConfig::parse(body, Scenario::Lyapunov).unwrap();
        prop_assert_eq!(cfg.values(), again.values());
        prop_assert_eq!(cfg.seed().unwrap(), seed);
    }
}
