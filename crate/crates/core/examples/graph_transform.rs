use domlab::cocycle::SplittingField;
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::graphs::{
    graph_transform_detailed, iterate_transform, make_graph, measured_chart_radius, scale_to_dispersion,
    transform_checks, ChartFrame, GraphRecipe,
};

fn main() -> domlab::Result<()> {
    let map = Diffeo::PerturbedCat { eps: 0.05 };
    let field = SplittingField::for_map(&map, 1)?;
    let delta = measured_chart_radius(&map, 1e-3, 0);
    let x = TorusPoint::new(&[0.3, 0.6]);
    println!("chart radius {delta:e}");

    let chart = ChartFrame::from_splitting(&field, &x, delta)?;
    let raw = make_graph(chart, GraphRecipe::RandomSmooth { seed: 11, amplitude: 0.01 }, 33)?;
    let graph = scale_to_dispersion(&raw, 0.3)?;

    let target = ChartFrame::from_splitting(&field, &map.apply(&x), delta)?;
    let (image, diag) = graph_transform_detailed(&map, &graph, &target)?;
    println!("one step: disp {:.4} -> {:.4}, valid {:.3}", graph.dispersion().value, image.dispersion().value, diag.valid_fraction);
    let checks = transform_checks(&map, &graph, &image)?;
    println!(
        "  u1 variation {:.1e}, inverse identity {:.1e}, leaf image {:.1e}",
        checks.u1_variation, checks.inverse_identity_residual, checks.leaf_image_error
    );

    let trace = iterate_transform(&map, &field, &graph, 10)?;
    for s in &trace.steps {
        println!("step {:>2}: disp {:.6}  bound {:.6}  {}", s.step, s.disp.value, s.bound_rhs, if s.holds { "ok" } else { "exceeded" });
    }
    println!("first step below initial: {:?}", trace.first_below_initial);
    Ok(())
}
