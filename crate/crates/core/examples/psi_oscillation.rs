use domlab::cocycle::{psi, psi_n, SplittingField};
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::entropy::oscillation_check;

fn main() -> domlab::Result<()> {
    let map = Diffeo::PerturbedCat { eps: 0.05 };
    let field = SplittingField::for_map(&map, 1)?;
    let x = TorusPoint::new(&[0.2, 0.9]);
    println!("psi(x) = {:.6}, psi_10(x) = {:.6}", psi(&map, &field, &x)?, psi_n(&map, &field, &x, 10)?);

    for n in [5, 10, 20] {
        let r = oscillation_check(&map, &field, n, 0.1, 64, 3)?;
        println!(
            "n = {n:>2}: max |psi_n(y) - psi_n(x)| = {:.3e} <= {:.3e} ({} pairs, delta1 {:.2e}): {}",
            r.max_difference, r.bound, r.pairs, r.delta1, r.holds
        );
    }
    Ok(())
}
