use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn screenline(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_screenline"))
        .current_dir(dir)
        .args(args)
        .env_remove("SCREENLINE_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn fixture(dir: &TempDir, name: &str) -> String {
    let file = format!("{name}.json");
    let out = screenline(dir.path(), &["gen", "fixture", name, "--out", &file]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    file
}

#[test]
fn solve_brute_on_toy_a_reports_the_optimum() {
    let dir = TempDir::new().unwrap();
    let a = fixture(&dir, "toy-a");
    let out = screenline(dir.path(), &["solve", "--instance", &a, "--solver", "brute", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read_json(&dir.path().join("r.json"));
    assert_eq!(report["value"].as_f64(), Some(-0.5));
    assert_eq!(report["menu"], json!([0, 3]));
    assert_eq!(report["status"], "exact");
    assert_eq!(report["contract"]["assignment"], json!({"x1": 0, "x2": 3}));
}

#[test]
fn solve_writes_plot_csv_next_to_the_report() {
    let dir = TempDir::new().unwrap();
    let a = fixture(&dir, "toy-a");
    let out = screenline(dir.path(), &["solve", "--instance", &a, "--solver", "menu", "--out", "r.json", "--emit-plot"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv, "item,price,q1,uptake\n0,0,0,0.5\n3,2,1,0.5\n");
}

#[test]
fn check_flags_a_budget_violation_with_exit_one() {
    let dir = TempDir::new().unwrap();
    let b = fixture(&dir, "toy-b");
    let contract = json!({"assignment": {"x1@0.5": 3, "x1@2": 0, "x2@0.5": 0, "x2@2": 0}});
    fs::write(dir.path().join("c.json"), contract.to_string()).unwrap();
    let out = screenline(dir.path(), &["check", "--instance", &b, "--contract", "c.json", "--out", "report.json"]);
    assert_eq!(out.status.code(), Some(1));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["feasible"], false);
    let budget = report["budget_violations"].as_array().expect("budget violations listed");
    assert!(budget.iter().any(|v| v["point"] == "x1@0.5"), "{report}");
}

#[test]
fn check_accepts_a_solve_report_as_contract() {
    let dir = TempDir::new().unwrap();
    let b = fixture(&dir, "toy-b");
    assert!(screenline(dir.path(), &["solve", "--instance", &b, "--out", "r.json"]).status.success());
    let out = screenline(dir.path(), &["check", "--instance", &b, "--contract", "r.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["feasible"], true);
}

#[test]
fn coercivity_without_witness_exits_two() {
    let dir = TempDir::new().unwrap();
    let instance = json!({
        "types": {"ids": ["x1", "x2"], "weights": [0.5, 0.5]},
        "grid": {"allocations": [{"abstract": "z0"}, {"abstract": "z1"}, {"abstract": "z2"}], "outside_index": 0},
        "utility": {"table": [[0.0, 1.0, 2.0], [0.0, 2.0, 1.0]]},
        "cost": {"table": [0.5, 1.0, 2.0]},
        "variant": {"kind": "partial", "reservation": [10.0, 10.0]}
    });
    fs::write(dir.path().join("p.json"), instance.to_string()).unwrap();
    let out = screenline(dir.path(), &["coercivity", "--instance", "p.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("AssumptionViolated"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
}

#[test]
fn coercivity_prints_mask_and_certificate() {
    let dir = TempDir::new().unwrap();
    let a = fixture(&dir, "toy-a");
    let out = screenline(dir.path(), &["coercivity", "--instance", &a]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["mask"]["members"], json!([0, 2, 3]));
    let r = doc["certificate"]["q_radius"].as_f64().unwrap();
    assert!((r - 3.0).abs() < 1e-9);
}

#[test]
fn size_cap_exits_three() {
    let dir = TempDir::new().unwrap();
    let gen = screenline(
        dir.path(),
        &["gen", "random", "--types", "12", "--allocs", "12", "--seed", "1", "--out", "big.json"],
    );
    assert!(gen.status.success());
    let out = screenline(dir.path(), &["solve", "--instance", "big.json", "--solver", "brute"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("TooLarge"), "{}", stderr(&out));
}

#[test]
fn validation_errors_exit_one_and_name_the_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"types": {"ids": ["x"], "weights": [2.0]}}"#).unwrap();
    let out = screenline(dir.path(), &["solve", "--instance", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("SchemaError"), "{}", stderr(&out));

    let missing = screenline(dir.path(), &["check", "--instance", "nope.json", "--contract", "c.json"]);
    assert_eq!(missing.status.code(), Some(1));

    let a = fixture(&dir, "toy-a");
    let wrong_variant = screenline(dir.path(), &["diag", "singular", "--instance", &a, "--menu", "0"]);
    assert_eq!(wrong_variant.status.code(), Some(1));
    assert!(stderr(&wrong_variant).contains("VariantError"), "{}", stderr(&wrong_variant));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = TempDir::new().unwrap();
    assert_eq!(screenline(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(screenline(dir.path(), &["solve", "--solver", "simplex"]).status.code(), Some(1));
    assert_eq!(screenline(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(screenline(dir.path(), &["--version"]).status.code(), Some(0));
}

#[test]
fn improve_reads_a_contract_and_reports_the_trace() {
    let dir = TempDir::new().unwrap();
    let a = fixture(&dir, "toy-a");
    fs::write(dir.path().join("c.json"), r#"{"assignment": {"x1": 1, "x2": 1}}"#).unwrap();
    let out = screenline(dir.path(), &["improve", "--instance", &a, "--contract", "c.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["value_after"].as_f64().unwrap() <= doc["value_before"].as_f64().unwrap());
    assert_eq!(doc["trace"]["points"].as_array().unwrap().len(), 2);
}

#[test]
fn diag_commands_produce_expected_values() {
    let dir = TempDir::new().unwrap();
    let a = fixture(&dir, "toy-a");
    let b = fixture(&dir, "toy-b");

    let h = screenline(dir.path(), &["diag", "hausdorff", "--instance", &a, "--a", "0", "--b", "3"]);
    let doc: Value = serde_json::from_slice(&h.stdout).unwrap();
    assert!((doc["distance"].as_f64().unwrap() - 5f64.sqrt()).abs() < 1e-12);

    let s = screenline(dir.path(), &["diag", "singular", "--instance", &b, "--menu", "0,5", "--out", "s.json"]);
    assert!(s.status.success());
    let doc = read_json(&dir.path().join("s.json"));
    assert_eq!(doc["theta_mass"].as_f64(), Some(0.25));
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "x2,0.5,1,0,true"), "{csv}");

    let p = screenline(
        dir.path(),
        &["diag", "penalized", "--instance", &b, "--menu", "0,3", "--type", "x2", "--budget", "0.5", "--lambda", "0,0.5,10"],
    );
    let doc: Value = serde_json::from_slice(&p.stdout).unwrap();
    let values: Vec<f64> = doc["values"].as_array().unwrap().iter().map(|v| v["value"].as_f64().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]), "{values:?}");
    assert_eq!(values[2], doc["budget_indirect_utility"].as_f64().unwrap());

    let l = screenline(dir.path(), &["diag", "limit", "--instance", &b, "--restarts", "4"]);
    assert_eq!(l.status.code(), Some(0), "{}", stderr(&l));
    let doc: Value = serde_json::from_slice(&l.stdout).unwrap();
    assert!(doc["limit"]["value"].as_f64().unwrap() <= doc["final_value"].as_f64().unwrap());
}

#[test]
fn tol_override_and_thread_env_are_accepted() {
    let dir = TempDir::new().unwrap();
    let a = fixture(&dir, "toy-a");
    let out = Command::new(env!("CARGO_BIN_EXE_screenline"))
        .current_dir(dir.path())
        .args(["solve", "--instance", &a, "--tol", "1e-6"])
        .env("SCREENLINE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let bad = screenline(dir.path(), &["solve", "--instance", &a, "--tol", "-1"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn run_is_callable_in_process() {
    assert_eq!(screenline_cli::run(["screenline", "gen", "fixture", "toy-z"]), 1);
}
