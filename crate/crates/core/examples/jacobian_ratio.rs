use domlab::cocycle::SplittingField;
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::graphs::{
    dispersion_for_tilt, iterate_transform, jacobian_ratio_check, leaf_tilt_bound, make_graph, measured_chart_radius,
    ratio_tilt_threshold, ChartFrame, GraphRecipe,
};

fn main() -> domlab::Result<()> {
    let map = Diffeo::PerturbedCat { eps: 0.05 };
    let field = SplittingField::for_map(&map, 1)?;
    let eps = 0.01;

    let tilt = ratio_tilt_threshold(&map, &field, eps, 0)?;
    println!("tilt threshold {tilt:e}, dispersion threshold {:e}", dispersion_for_tilt(tilt));
    println!("disp 0.3 tilts leaves by at most {:.4}", leaf_tilt_bound(0.3));

    let delta = measured_chart_radius(&map, 1e-3, 0);
    let chart = ChartFrame::from_splitting(&field, &TorusPoint::new(&[0.7, 0.2]), delta)?;
    let graph = make_graph(chart, GraphRecipe::Linear { slope: 0.3 }, 33)?;
    let trace = iterate_transform(&map, &field, &graph, 12)?;
    let r = jacobian_ratio_check(&map, &field, &trace, eps)?;
    println!("n0 = {:?}, holds = {}", r.n0, r.holds);
    for (k, v) in r.max_abs_log_ratio.iter().enumerate() {
        println!("  step {k:>2}: max |log ratio| {v:.3e}");
    }
    Ok(())
}
