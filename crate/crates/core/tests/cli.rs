use std::path::Path;
use std::process::{Command, Output};

fn run(scenario: &str, config: &str, out: &Path, envs: &[(&str, &str)]) -> Output {
    let cfg = out.join("run.cfg");
    std::fs::create_dir_all(out).unwrap();
    std::fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_domlab"));
    cmd.arg(scenario).arg("--config").arg(&cfg).arg("--out").arg(out.join("res"));
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(out.join("res/report.json")).unwrap()).unwrap()
}

#[test]
fn lyapunov_run_writes_report_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("lyapunov", "map = cat\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["status"], "ok");
    let chi = r["payload"]["lyapunov"]["exponents"][0].as_f64().unwrap();
    assert!((chi - 0.9624236501192069).abs() < 1e-6);
    assert!(dir.path().join("res/timing.json").exists());
    assert_eq!(r["input_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn typo_is_a_validation_error_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("srb-like", "epsilom = 0.1\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("did you mean `eps`"));
}

#[test]
fn eps_below_truncation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("srb-like", "n_trunc = 4\neps = 0.1\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncation"));
}

#[test]
fn unknown_scenario_and_bad_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("lyapunov-spectrum", "", dir.path(), &[]).status.code(), Some(2));
    assert_eq!(run("lyapunov", "", dir.path(), &[("DOMLAB_THREADS", "abc")]).status.code(), Some(2));
}

#[test]
fn identity_is_reported_non_dominated() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("dominate", "map = identity\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(dir.path())["payload"]["domination"]["verdict"], "no domination detected");
}

#[test]
fn pesin_gap_without_splitting_is_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("pesin-gap", "map = identity\nsamples_per_axis = 50\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(report(dir.path())["status"], "error");
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let cfg = "map = perturbed_cat\nseed = 3\n[basin-sweep]\ngrid = 16\nns = 10,50\neps_list = 0.1,0.05\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run("basin-sweep", cfg, a.path(), &[("DOMLAB_THREADS", "1")]).status.code(), Some(0));
    assert_eq!(run("basin-sweep", cfg, b.path(), &[("DOMLAB_THREADS", "8")]).status.code(), Some(0));
    for f in ["report.json", "basin.csv"] {
        assert_eq!(std::fs::read(a.path().join("res").join(f)).unwrap(), std::fs::read(b.path().join("res").join(f)).unwrap());
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), "seed = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_domlab"))
        .args(["lyapunov", "--seed", "99", "--config"])
        .arg(dir.path().join("c.cfg"))
        .arg("--out")
        .arg(dir.path().join("res"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(dir.path())["config"]["seed"], "99");
}
