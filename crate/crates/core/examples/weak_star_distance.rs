use domlab::cocycle::{SplittingField, SplittingPsi};
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::measures::{empirical_measure, weak_star_distance, Measure, TestFunctionFamily};

fn main() -> domlab::Result<()> {
    let family = TestFunctionFamily::new(2, 12)?;
    println!("{}; truncation bound {:e}", family.describe(), family.truncation_error_bound());

    let leb = Measure::Lebesgue { dim: 2 };
    let x = TorusPoint::new(&[0.123, 0.456]);
    for n in [10, 100, 1000, 10_000] {
        let sigma = Measure::Atomic { measure: empirical_measure(&Diffeo::Cat, &x, n)? };
        let d = weak_star_distance(&sigma, &leb, &family, None)?;
        println!("n = {n:>5}: dist(sigma, Leb) = {:.5}", d.value);
    }

    let field = SplittingField::cat();
    let psi = SplittingPsi::new(&Diffeo::Cat, &field);
    let origin = Measure::dirac(TorusPoint::origin(2));
    let d = weak_star_distance(&origin, &leb, &family, Some(&psi))?;
    println!("with psi: dist(delta_0, Leb) = {:.5}", d.value);
    Ok(())
}
