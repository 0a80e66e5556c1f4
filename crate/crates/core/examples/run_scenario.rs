//! Builds a configuration in code and runs it like the `domlab` binary,
//! writing `report.json`, the CSVs and `timing.json` to the directory given
//! as the first argument (default `out/graph-transform`).

use domlab::cli::{execute, write_outcome, ExperimentConfig, Scenario};

const CONFIG: &str = "
map = perturbed_cat
map_eps = 0.05
seed = 7

[graph-transform]
recipe = random
disp = 0.25
steps = 8
";

fn main() {
    let cfg = match ExperimentConfig::parse(CONFIG, Scenario::GraphTransform) {
        Ok(c) => c,
        Err(findings) => {
            for f in findings {
                eprintln!("{f}");
            }
            std::process::exit(2);
        }
    };
    let outcome = execute(&cfg, Some(2)).expect("thread pool");
    let dir = std::env::args().nth(1).unwrap_or_else(|| "out/graph-transform".into());
    let dir = std::path::Path::new(&dir);
    for p in write_outcome(&outcome, dir).expect("writable output dir") {
        println!("wrote {}", p.display());
    }
    println!("status {} (exit {}), input hash {}", outcome.report.status, outcome.exit_code, outcome.report.input_hash);
    for w in &outcome.report.warnings {
        println!("warning: {w}");
    }
}
