use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monogp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn monogp")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn synth(dir: &Path, family: &str, seed: &str) {
    let out = run(dir, &["synth", "--family", family, "--n", "30", "--snr", "0.9", "--seed", seed, "--out", "d.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn increasing_data_is_detected_as_increasing() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "linear:1", "1");
    let out = run(dir.path(), &["detect", "--data", "d.csv", "--out", "r.json"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("+1"), "{stdout}");
    let r = report(&dir.path().join("r.json"));
    assert_eq!(r["report"]["directions"], serde_json::json!([1]));
    assert_eq!(r["report"]["plain_fits"], 1);
    assert_eq!(r["report"]["ep_fits"], 2);
}

#[test]
fn missing_input_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["detect", "--data", "missing.csv", "--out", "r.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
    assert!(!dir.path().join("r.json").exists());
}

#[test]
fn malformed_table_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x,y\n0.1,0.2\n0.3,oops\n").unwrap();
    let out = run(dir.path(), &["detect", "--data", "bad.csv", "--out", "r.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn invalid_coefficients_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "linear:1", "1");
    let out = run(dir.path(), &["detect", "--data", "d.csv", "--p1", "0.4", "--p2", "0.5", "--out", "r.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn dry_run_plans_without_fitting() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "sigmoid:1", "2");
    let out = run(dir.path(), &["detect", "--data", "d.csv", "--out", "r.json", "--dry-run"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 plain fit + 2 monotone EP fits"));
    assert!(!dir.path().join("r.json").exists());
}

#[test]
fn same_seed_same_report_and_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "sigmoid:1", "4");
    let args = ["detect", "--data", "d.csv", "--seed", "9", "--p1", "0.95"];
    assert_eq!(code(&run(dir.path(), &[&args[..], &["--out", "a.json"]].concat())), 0);
    assert_eq!(code(&run(dir.path(), &[&args[..], &["--out", "b.json"]].concat())), 0);
    let a = report(&dir.path().join("a.json"));
    let b = report(&dir.path().join("b.json"));
    assert_eq!(a["report"], b["report"]);

    // The echoed options reproduce the run.
    assert_eq!(code(&run(dir.path(), &["detect", "--config", "a.json", "--out", "c.json"])), 0);
    let c = report(&dir.path().join("c.json"));
    assert_eq!(a["report"], c["report"]);
    assert_eq!(a["config"]["effective"], c["config"]["effective"]);
    assert_eq!(c["config"]["effective"]["amd"]["p1"], 0.95);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"p1": 0.9, "bogus": 1}"#).unwrap();
    let out = run(dir.path(), &["detect", "--config", "c.json", "--data", "d.csv", "--out", "r.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["sweep-p1", "--family", "linear:0,linear:1", "--n", "15", "--snr", "0.9", "--reps", "2", "--out", "s.csv", "--summary", "q.csv"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(rows.starts_with("# {"));
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);
    let summary = std::fs::read_to_string(dir.path().join("q.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("linear,1,15,0.9,p1_limit,2,")));
}

#[test]
fn robustness_writes_region_table() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "linear:-1", "6");
    let out = run(dir.path(), &["robustness", "--data", "d.csv", "--out", "r.json", "--summary", "regions.csv"]);
    assert_eq!(code(&out), 0);
    let table = std::fs::read_to_string(dir.path().join("regions.csv")).unwrap();
    let row = table.lines().find(|l| l.starts_with("0,")).unwrap();
    assert!(row.starts_with("0,x,-1,"), "{row}");
}
