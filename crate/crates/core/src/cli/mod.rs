//! Experiment runner: `domlab <scenario> --config <path> [--out <dir>] [--seed <u64>]`.
//!
//! Writes `report.json` (config echo, input hash, payload, warnings and
//! output checksums), the scenario CSVs, and `timing.json` with the
//! wall-clock time. `report.json` and the CSVs are byte-identical across
//! re-runs and worker counts; timing is kept apart for that reason.
//! `DOMLAB_THREADS` caps the worker count.

pub mod config;
pub mod scenarios;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use config::{knob_reference, validate, validate_text, ExperimentConfig, Finding, Scenario, KNOBS};
pub use scenarios::{run_scenario, OutputFile, ScenarioOutput};

use crate::error::{DomlabError, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const THREADS_VAR: &str = "DOMLAB_THREADS";

#[derive(Clone, Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: Scenario,
    /// `sha256("blob <len>\0" + canonical config)`.
    pub input_hash: String,
    pub config: BTreeMap<String, String>,
    /// `ok`, `failed` (an asserted property does not hold) or `error`.
    pub status: &'static str,
    pub payload: Value,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputRecord>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub files: Vec<OutputFile>,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub exit_code: i32,
}

impl RunOutcome {
    pub fn report_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(&self.report).expect("report serializes");
        v.push(b'\n');
        v
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Git-style content hash of the resolved configuration.
pub fn input_hash(cfg: &ExperimentConfig) -> String {
    let body = cfg.canonical_text();
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    hex(&h.finalize())
}

pub fn exit_code_for(err: &DomlabError) -> i32 {
    if err.is_config() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERICAL
    }
}

/// Worker count from `DOMLAB_THREADS`; `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(DomlabError::Config(format!("{THREADS_VAR} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs a scenario on a pool of `threads` workers (all cores when `None`)
/// without touching the file system.
pub fn execute(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| DomlabError::Resource(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let result = pool.install(|| run_scenario(cfg));
    let wall_clock_seconds = start.elapsed().as_secs_f64();
    let (status, payload, warnings, files, error, exit_code) = match result {
        Ok(out) if out.passed => ("ok", out.payload, out.warnings, out.files, None, EXIT_OK),
        Ok(out) => ("failed", out.payload, out.warnings, out.files, None, EXIT_NUMERICAL),
        Err(e) => ("error", Value::Null, vec![], vec![], Some(e.to_string()), exit_code_for(&e)),
    };
    let outputs = files
        .iter()
        .map(|f| OutputRecord { file: f.name.clone(), bytes: f.bytes.len(), sha256: sha256_hex(&f.bytes) })
        .collect();
    let report = RunReport {
        tool: "domlab",
        version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.scenario,
        input_hash: input_hash(cfg),
        config: cfg.values().clone(),
        status,
        payload,
        warnings,
        outputs,
        error,
    };
    Ok(RunOutcome { report, files, wall_clock_seconds, threads: pool.current_num_threads(), exit_code })
}

/// Writes the scenario files, `report.json` and `timing.json` into `dir`.
pub fn write_outcome(outcome: &RunOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |p: &Path, e: std::io::Error| DomlabError::Resource(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| io(&p, e))?;
        written.push(p);
        Ok(())
    };
    for f in &outcome.files {
        put(&f.name, &f.bytes)?;
    }
    put("report.json", &outcome.report_json())?;
    let timing = serde_json::json!({
        "scenario": outcome.report.scenario,
        "threads": outcome.threads,
        "wall_clock_seconds": outcome.wall_clock_seconds,
    });
    let mut t = serde_json::to_vec_pretty(&timing).expect("timing serializes");
    t.push(b'\n');
    put("timing.json", &t)?;
    Ok(written)
}

#[derive(Parser, Debug)]
#[command(name = "domlab", version, about = "Dominated-splitting experiments on tori")]
pub struct Args {
    /// One of: lyapunov, dominate, entropy, pesin-gap, srb-like, rate-bound,
    /// graph-transform, basin-sweep, property-suite.
    pub scenario: String,
    /// Config file (`key = value` lines, optional `[scenario]` sections).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the `seed` knob.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses arguments, runs, writes outputs and returns the exit code.
pub fn main_with_args(args: Args) -> i32 {
    let scenario = match Scenario::from_name(&args.scenario) {
        Ok(s) => s,
        Err(f) => {
            eprintln!("error: {f}");
            return EXIT_VALIDATION;
        }
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return EXIT_VALIDATION;
        }
    };
    let mut cfg = match ExperimentConfig::parse(&text, scenario) {
        Ok(c) => c,
        Err(findings) => {
            for f in findings {
                eprintln!("config: {f}");
            }
            return EXIT_VALIDATION;
        }
    };
    if let Some(seed) = args.seed {
        if let Err(e) = cfg.set("seed", &seed.to_string()) {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    }
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let outcome = match execute(&cfg, threads) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
    };
    if let Err(e) = write_outcome(&outcome, &args.out) {
        eprintln!("error: {e}");
        return EXIT_IO;
    }
    for w in &outcome.report.warnings {
        eprintln!("warning: {w}");
    }
    match &outcome.report.error {
        Some(e) => eprintln!("error: {e}"),
        None => println!(
            "{} {} in {:.2}s -> {}",
            scenario,
            outcome.report.status,
            outcome.wall_clock_seconds,
            args.out.join("report.json").display()
        ),
    }
    outcome.exit_code
}

pub fn main_entry() -> i32 {
    main_with_args(Args::parse())
}
