mod common;

use common::fixture;
use dynflat::cli::main_with;
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["dynflat"];
    full.extend_from_slice(args);
    let code = main_with(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

#[test]
fn check_flat_system_exits_zero() {
    let (code, out, _) = run(&["check", &path("academic1.sys")]);
    assert_eq!(code, 0);
    assert!(out.contains("verdict: flat"), "{out}");
    assert!(out.contains("d=2"));
    assert!(out.contains("y1 = x3"));
}

#[test]
fn check_linear_system_is_static() {
    let (code, out, _) = run(&["check", &path("linear.sys"), "--format", "json"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], "dynflat.trace/1");
    assert_eq!(v["verdict"]["d"], 0);
    assert_eq!(v["verdict"]["r"], serde_json::json!([3, 2]));
    assert_eq!(v["verdict"]["case_path"], serde_json::json!([]));
}

#[test]
fn exhausted_budget_is_a_negative_verdict() {
    let (code, out, _) = run(&["check", &path("academic1.sys"), "--max-prolong", "0", "--format", "json"]);
    assert_eq!(code, 2);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verdict"]["status"], "not_linearizable");
}

#[test]
fn missing_integral_is_inconclusive_until_hinted() {
    let (code, out, _) = run(&["check", &path("exp_chart.sys")]);
    assert_eq!(code, 3);
    assert!(out.contains("hint first_integral"), "{out}");
    let (code, out, _) = run(&["check", &path("exp_chart.sys"), "--hints", &path("exp_chart.hints")]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("exp(x2)"));
}

#[test]
fn verify_accepts_and_rejects() {
    let (code, out, _) = run(&["verify", &path("academic1.sys"), "x3, x1 - x2*u1/u2"]);
    assert_eq!(code, 0);
    assert!(out.contains("verified: yes"), "{out}");
    let (code, out, _) = run(&["verify", &path("academic1.sys"), "x1, x2"]);
    assert_eq!(code, 2);
    assert!(out.contains("verified: no"), "{out}");
}

#[test]
fn verify_rejects_unknown_symbols() {
    let (code, _, err) = run(&["verify", &path("academic1.sys"), "x1, w"]);
    assert_eq!(code, 1);
    assert!(err.contains('w'), "{err}");
}

#[test]
fn info_reports_pai_candidates() {
    let (code, out, _) = run(&["info", &path("academic1.sys")]);
    assert_eq!(code, 0);
    assert!(out.contains("AI: no"));
    assert!(out.contains("PAI candidates: 2; pass filter: 1"), "{out}");
    let (_, out, _) = run(&["info", &path("vtol.sys"), "--format", "json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["ai"], true);
    assert_eq!(v["case"], "1");
}

#[test]
fn malformed_file_reports_position() {
    let dir = std::env::temp_dir().join(format!("dynflat-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("bad.sys");
    std::fs::write(&f, "system s\nstate x\ninput u\ndot x = u +* 2\n").unwrap();
    let (code, _, err) = run(&["check", f.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("4:12"), "{err}");
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&["check"]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["check", "/no/such/file.sys"]).0, 1);
    assert_eq!(run(&["check", &path("linear.sys"), "--samples", "zero"]).0, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("check"));
    assert_eq!(run(&["--version"]).0, 0);
}

#[test]
fn parallel_and_sequential_agree() {
    let seq = run(&["check", &path("academic1.sys"), "--format", "json"]).1;
    let par = run(&["check", &path("academic1.sys"), "--format", "json", "--parallel"]).1;
    let strip = |s: &str| {
        let mut v: Value = serde_json::from_str(s).unwrap();
        v["config"]["parallel"] = Value::Null;
        v
    };
    assert_eq!(strip(&seq), strip(&par));
}
