use domlab::cocycle::{assess_domination, domination_fit, SplittingField};
use domlab::dynamics::{Diffeo, TorusPoint};

fn grid(k: usize) -> Vec<TorusPoint> {
    (0..k * k)
        .map(|i| TorusPoint::new(&[((i % k) as f64 + 0.31) / k as f64, ((i / k) as f64 + 0.57) / k as f64]))
        .collect()
}

fn main() -> domlab::Result<()> {
    let points = grid(8);

    let fit = domination_fit(&Diffeo::Cat, &SplittingField::cat(), &points, 20)?;
    println!("cat: slope {:.8} (upper95 {:.3e}), C = {:.6}, {}", fit.slope, fit.slope_upper95, fit.c, fit.verdict);

    let perturbed = Diffeo::PerturbedCat { eps: 0.05 };
    let a = assess_domination(&perturbed, 1, &points, 20)?;
    println!("perturbed: slope {:.6}, C = {:.4}, {}", a.fit.slope, a.fit.c, a.verdict);

    let a = assess_domination(&Diffeo::Identity { dim: 2 }, 1, &points, 20)?;
    println!("identity: {}", a.verdict);
    if let Some(e) = a.splitting_error {
        println!("  ({e})");
    }
    Ok(())
}
