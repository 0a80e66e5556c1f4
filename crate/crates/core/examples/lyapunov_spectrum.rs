use domlab::cocycle::{lyapunov_spectrum, lyapunov_spectrum_with, LyapunovOptions};
use domlab::dynamics::{Diffeo, TorusPoint};

fn main() -> domlab::Result<()> {
    let x0 = TorusPoint::new(&[0.1, 0.2]);
    let report = lyapunov_spectrum(&Diffeo::Cat, &x0, 10_000, 1)?;
    println!("cat: {:?}", report.exponents);
    println!("  exact: ±{}", ((3.0 + 5f64.sqrt()) / 2.0).ln());
    println!("  mean log|det|: {:e}", report.mean_log_det);

    for eps in [0.02, 0.05, 0.1] {
        let r = lyapunov_spectrum(&Diffeo::PerturbedCat { eps }, &x0, 10_000, 1)?;
        println!("perturbed eps={eps}: {:?}", r.exponents);
    }

    let x3 = TorusPoint::new(&[0.1, 0.2, 0.3]);
    let opts = LyapunovOptions { n: 5_000, reorth_every: 5, transient: 100 };
    let r = lyapunov_spectrum_with(&Diffeo::CatCircle { kappa: 0.1 }, &x3, &opts)?;
    println!("cat x circle: {:?}", r.exponents);
    Ok(())
}
