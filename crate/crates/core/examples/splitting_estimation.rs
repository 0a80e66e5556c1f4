use domlab::cocycle::{estimate_frame, oseledets_splitting, SplittingField};
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::numeric::subspace_distance;

fn main() -> domlab::Result<()> {
    let x = TorusPoint::new(&[0.3, 0.7]);
    let exact = SplittingField::cat();
    let (frame, log_gap) = estimate_frame(&Diffeo::Cat, &x, 30, 1)?;
    println!("cat: log gap {log_gap:.3}");
    println!("  E error {:.2e}", subspace_distance(&frame.basis_e, &exact.basis_e(&x)?));
    println!("  F error {:.2e}", subspace_distance(&frame.basis_f, &exact.basis_f(&x)?));

    let map = Diffeo::PerturbedCat { eps: 0.05 };
    let orbit = map.orbit(&x, 64);
    let field = oseledets_splitting(&map, &orbit, 30, 1)?;
    println!("perturbed: equivariance residual {:.2e}", field.equivariance_residual().unwrap_or(f64::NAN));
    println!("{}", serde_json::to_string_pretty(&field.summary()).expect("summary serializes"));
    Ok(())
}
