use domlab::cocycle::SplittingField;
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::graphs::{leaf_volume, make_graph, measure_rebase_radius, rebase_graph, ChartFrame, GraphRecipe};

fn main() -> domlab::Result<()> {
    let field = SplittingField::for_map(&Diffeo::PerturbedCat { eps: 0.05 }, 1)?;
    let x = TorusPoint::new(&[0.4, 0.1]);
    let chart = ChartFrame::from_splitting(&field, &x, 5e-3)?;
    let graph = make_graph(chart, GraphRecipe::Bilinear { a: 60.0 }, 33)?;
    println!("disp {:.4}", graph.dispersion().value);

    for h in [1e-4, 5e-4, 1e-3] {
        let z = x.translate(&[h, -h]);
        let g = rebase_graph(&graph, &field, &z)?;
        println!("rebased by {h:e}: disp {:.4}, valid {:.3}", g.dispersion().value, g.valid_fraction());
    }

    let r = measure_rebase_radius(&graph, &field, 0.49)?;
    println!("rebase radius keeping disp < 0.49: {r:e}");

    let v = leaf_volume(&graph, &[0.0])?;
    println!("central leaf length {:.6e} <= {:.6e}: {}", v.volume, v.bound, v.holds);
    Ok(())
}
