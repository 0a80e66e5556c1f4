use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::measures::{srb_like_score, LebesgueSample, Measure, TestFunctionFamily, WeakStarMetric};

fn main() -> domlab::Result<()> {
    let family = TestFunctionFamily::new(2, 12)?;
    let metric = WeakStarMetric::new(&family, None);
    let sample = LebesgueSample::halton(2, 2048, 7)?;
    let ns = [25, 50, 100, 200];

    let candidates = [
        ("Lebesgue", Measure::Lebesgue { dim: 2 }),
        ("delta_0", Measure::dirac(TorusPoint::origin(2))),
        ("delta_(0.5,0.5)", Measure::dirac(TorusPoint::new(&[0.5, 0.5]))),
    ];
    for map in [Diffeo::Cat, Diffeo::PerturbedCat { eps: 0.05 }] {
        println!("{:?}", map);
        for (label, mu) in &candidates {
            let s = srb_like_score(&map, mu, 0.05, &ns, &sample, &metric)?;
            println!("  {label:<16} {:?} -> {}", s.fractions, s.label);
        }
    }
    Ok(())
}
