use std::path::Path;
use std::process::{Command, Output};

fn centralspin(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_centralspin"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    cmd.output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sidecar(out: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(out.with_extension("json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn weights_to_stdout() {
    let o = centralspin(&["weights", "--n-bath", "4"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "twice_S,weight,gaussian");
    assert_eq!(lines.len(), 4);
    let total: f64 = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(centralspin(&["weights", "--n-bath", "70"], None).status.code(), Some(2));
    assert_eq!(centralspin(&["simulate", "--n-bath", "3", "--j", "-1"], None).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"n_bath": 3, "no_such_field": 1}"#).unwrap();
    let o = centralspin(&["simulate", "--config", path_str(&cfg)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_field"));
    let missing = centralspin(&["simulate", "--config", "/nonexistent/config.json"], None);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn propagator_failure_exits_three_with_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"propagator": {"method": "chebyshev", "step": 100.0, "tolerance": 1e-12, "max_order": 4}}"#,
    )
    .unwrap();
    let out = dir.path().join("run.csv");
    let o = centralspin(
        &["simulate", "--n-bath", "4", "--realizations", "2", "--config", path_str(&cfg), "--out", path_str(&out)],
        None,
    );
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().find(|l| l.starts_with("residual: ")).expect("residual line");
    let r: f64 = line["residual: ".len()..].parse().unwrap();
    assert!(r > 1e-12);
}

#[test]
fn sidecar_records_config_seed_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let o = centralspin(
        &["simulate", "--n-bath", "5", "--realizations", "3", "--seed", "42", "--out", path_str(&out)],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = sidecar(&out);
    assert_eq!(s["seed"], 42);
    assert_eq!(s["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(s["config"]["n_bath"], 5);
    assert_eq!(s["config"]["realizations"], 3);
    assert_eq!(s["config"]["experiment"], "equal_coupling");
    for suffix in ["closed_form", "semianalytic", "envelope"] {
        assert!(dir.path().join(format!("run.{suffix}.csv")).exists(), "{suffix}");
    }
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("t,"));
}

#[test]
fn json_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n_bath": 3, "seed": 9}"#).unwrap();
    let out = dir.path().join("run.csv");
    let o = centralspin(
        &["simulate", "--n-bath", "6", "--seed", "1", "--realizations", "2", "--config", path_str(&cfg), "--out", path_str(&out)],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = sidecar(&out);
    assert_eq!(s["config"]["n_bath"], 3);
    assert_eq!(s["seed"], 9);
    assert_eq!(s["config"]["realizations"], 2);
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("run{threads}.csv"));
        let o = centralspin(
            &["simulate", "--n-bath", "7", "--jitter", "0.2", "--realizations", "6", "--out", path_str(&out)],
            Some(threads),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn analytic_and_envelope_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let o = centralspin(&["analytic", "--n-bath", "13", "--curve", "semianalytic", "--out", path_str(&curve)], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(sidecar(&curve)["config"]["curve"], "semianalytic");
    let env = dir.path().join("env.csv");
    let o = centralspin(&["envelope", "--input", path_str(&curve), "--out", path_str(&env)], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&env).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,peak");
    assert!(text.lines().count() > 4);
}

#[test]
fn parity_rejects_unequal_couplings() {
    let o = centralspin(&["parity", "--n-bath", "4", "--jitter", "0.1"], None);
    assert_eq!(o.status.code(), Some(2));
}
