use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geolab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("geolab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str], config: Option<&str>, tag: &str) -> (i32, Option<Value>) {
    let out = scratch(&format!("{tag}.json"));
    let mut cmd = bin();
    cmd.args(args).arg("--out").arg(&out);
    if let Some(text) = config {
        let cfg = scratch(&format!("{tag}-config.json"));
        std::fs::write(&cfg, text).unwrap();
        cmd.arg("--config").arg(cfg);
    }
    let status = cmd.stderr(std::process::Stdio::null()).status().unwrap();
    let report = std::fs::read_to_string(&out).ok().map(|t| serde_json::from_str(&t).unwrap());
    (status.code().unwrap(), report)
}

fn strip_duration(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("duration_secs");
    v
}

#[test]
fn torus_report_schema_and_csv() {
    let csv = scratch("torus.csv");
    let (code, report) = run(
        &["torus", "--samples.grid", "6", "--csv", csv.to_str().unwrap()],
        Some(r#"{"space": {"lattice": [[1, 0], [0.5, 0.8660254037844386]]}}"#),
        "torus",
    );
    assert_eq!(code, 0);
    let r = report.unwrap();
    assert_eq!(r["experiment"], "torus");
    assert_eq!(r["passed"], true);
    assert!(r["duration_secs"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["tolerances"]["min_tol"], 1e-7);
    assert_eq!(r["config"]["samples"]["grid"], 6);
    for claim in r["claims"].as_array().unwrap() {
        for key in ["id", "anchor", "passed", "expected", "measured"] {
            assert!(claim.get(key).is_some(), "claim lacks {key}");
        }
        assert!(!claim["anchor"].as_str().unwrap().is_empty());
    }
    assert_eq!(r["measurements"]["deep_hole"]["order"], 3);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next(), Some("p1,p2,value,order"));
    assert_eq!(text.lines().count(), 37);
}

#[test]
fn reports_are_deterministic_apart_from_duration() {
    let args = ["hyperbolic", "--seeds", "2", "--samples.probe-dirs", "16"];
    let cfg = Some(r#"{"space": "octagon", "rng_seed": 3}"#);
    let (c1, a) = run(&args, cfg, "det-a");
    let (c2, b) = run(&args, cfg, "det-b");
    assert_eq!(c1, c2);
    assert_eq!(strip_duration(a.unwrap()), strip_duration(b.unwrap()));
}

#[test]
fn overrides_take_precedence_over_the_config() {
    let (code, report) = run(
        &["convexity", "--samples.midpoint-trials", "10", "--tolerances.tol-conv", "1e-8", "--rng-seed", "5"],
        Some(r#"{"samples": {"midpoint_trials": 999, "comparison_trials": 10, "profile_trials": 4}}"#),
        "override",
    );
    assert_eq!(code, 0);
    let r = report.unwrap();
    assert_eq!(r["config"]["samples"]["midpoint_trials"], 10);
    assert_eq!(r["config"]["samples"]["comparison_trials"], 10);
    assert_eq!(r["tolerances"]["tol_conv"], 1e-8);
    assert_eq!(r["config"]["rng_seed"], 5);
}

#[test]
fn failed_claims_exit_with_one_and_still_write_the_report() {
    // a coarse tie band merges near-equal lifts and fails the order claim
    let (code, report) = run(
        &["torus", "--samples.grid", "2", "--tolerances.min-tol", "0.5"],
        Some(r#"{"space": {"lattice": [[1, 0], [0.35, 1.05]]}}"#),
        "fail",
    );
    assert_eq!(code, 1);
    assert_eq!(report.unwrap()["passed"], false);
}

#[test]
fn bad_configs_exit_with_two() {
    let (code, report) = run(&["halfspace"], Some(r#"{"tolerances": {"sep_tol": -1}}"#), "bad-tol");
    assert_eq!(code, 2);
    assert!(report.is_none());
    let (code, _) = run(&["torus"], Some("{ not json"), "bad-json");
    assert_eq!(code, 2);
    let (code, _) = run(&["torus", "--samples.grid", "0"], None, "bad-grid");
    assert_eq!(code, 2);
    let (code, _) = run(&["hyperbolic"], None, "wrong-space");
    assert_eq!(code, 2);
}
