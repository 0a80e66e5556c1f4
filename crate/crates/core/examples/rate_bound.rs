use domlab::cocycle::{SplittingField, SplittingPsi};
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::entropy::{entropy_rate, measure_sample, rate_bound_check, EntropyParams, GridPartition};
use domlab::measures::{LebesgueSample, Measure, TestFunctionFamily, WeakStarMetric};

fn main() -> domlab::Result<()> {
    let map = Diffeo::Cat;
    let field = SplittingField::cat();
    let family = TestFunctionFamily::new(2, 12)?;
    let psi = SplittingPsi::new(&map, &field);
    let metric = WeakStarMetric::new(&family, Some(&psi));
    let sample = LebesgueSample::grid(2, 48)?;
    let params = EntropyParams { partition: GridPartition::with_cells(2, 8)?, q_max: 5, miller_madow: true, strict: false };

    for (label, mu) in [("Lebesgue", Measure::Lebesgue { dim: 2 }), ("delta_0", Measure::dirac(TorusPoint::origin(2)))] {
        let h = entropy_rate(&map, &measure_sample(&mu, 300)?, &params)?.h_estimate;
        let r = rate_bound_check(&map, &field, &mu, &[0.1, 0.05], &[50, 100, 200, 400], &sample, &metric, h, 0.1)?;
        println!("{label}: rhs = h + int psi = {:+.4}", r.rhs);
        for row in &r.rows {
            let rates: Vec<String> = row.rates.iter().map(|v| v.map_or("-inf".into(), |v| format!("{v:+.4}"))).collect();
            println!("  eps {}: rates [{}], holds {}", row.eps, rates.join(", "), row.holds);
        }
    }
    Ok(())
}
