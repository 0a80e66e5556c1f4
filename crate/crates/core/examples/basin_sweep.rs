use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::measures::{basin_sweep, LebesgueSample, Measure, TestFunctionFamily, WeakStarMetric};

fn main() -> domlab::Result<()> {
    let family = TestFunctionFamily::new(2, 12)?;
    let metric = WeakStarMetric::new(&family, None);
    let sample = LebesgueSample::grid(2, 32)?;
    let ns = [10, 50, 100, 200];
    let eps_list = [0.2, 0.1, 0.05];

    for (label, mu) in [("Lebesgue", Measure::Lebesgue { dim: 2 }), ("delta_0", Measure::dirac(TorusPoint::origin(2)))] {
        let sweep = basin_sweep(&Diffeo::Cat, &mu, &ns, &sample, &metric)?;
        println!("{label} ({})", sample.describe());
        for eps in eps_list {
            let row: Vec<String> = sweep.fractions(eps).iter().map(|f| format!("{f:.4}")).collect();
            println!("  eps {eps:<5} n {ns:?}: {}", row.join(" "));
        }
    }

    let sweep = basin_sweep(&Diffeo::Cat, &Measure::Lebesgue { dim: 2 }, &ns, &sample, &metric)?;
    sweep.write_csv(std::io::stdout().lock(), &eps_list)?;
    Ok(())
}
