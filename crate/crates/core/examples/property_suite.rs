use domlab::properties::{run_property_suite, SuiteOptions};

fn main() -> domlab::Result<()> {
    let opts = SuiteOptions { seed: 2024, graphs: 10, graph_steps: 6, ..SuiteOptions::default() };
    let report = run_property_suite(&opts)?;
    for c in &report.checks {
        println!("{:<6} {:<10} {:<28} worst {:>10.3e}  tol {:.1e}", if c.passed { "ok" } else { "FAIL" }, c.module, c.name, c.worst, c.tolerance);
    }
    println!("{} checks, {} failed", report.checks.len(), report.failures().len());
    Ok(())
}
