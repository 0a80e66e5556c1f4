use domlab::cocycle::SplittingField;
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::entropy::{pesin_gap, EntropyParams, GridPartition, PesinParams};
use domlab::measures::Measure;

fn main() -> domlab::Result<()> {
    let params = PesinParams {
        entropy: EntropyParams { partition: GridPartition::with_cells(2, 16)?, q_max: 6, miller_madow: true, strict: false },
        lebesgue_per_axis: 500,
        exponent_per_axis: 8,
        lyapunov_n: 2_000,
    };
    let field = SplittingField::cat();
    for (label, mu) in [("Lebesgue", Measure::Lebesgue { dim: 2 }), ("delta_0", Measure::dirac(TorusPoint::origin(2)))] {
        let r = pesin_gap(&Diffeo::Cat, &field, &mu, &params)?;
        println!("{label}:");
        println!("  h = {:.4}, sum chi_F = {:.4}, gap = {:+.4}", r.h_estimate, r.sum_chi_f, r.gap_theorem);
        println!("  h + int psi = {:+.4}, ruelle residual = {:+.4}", r.h_plus_int_psi, r.ruelle_residual);
    }
    Ok(())
}
