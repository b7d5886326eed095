mod support;

use std::fs;

use serde_json::Value;
use support::*;

#[test]
fn tiny_case_runs_to_an_optimal_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let case = gen_case(dir.path(), "t1.json", &["--mode", "tiny"]);
    let bundle = dir.path().join("bundle");
    let out = optimize(&case, &bundle, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(missing_classes(&bundle).is_empty());
    let trace = read_json(&bundle.join("certifier_trace.json"));
    assert_eq!(trace["certification"]["status"], "OPTIMAL");
    assert_eq!(trace["certification"]["incumbent_j"].as_f64(), Some(3.0));
    let results = read_json(&bundle.join("results.json"));
    assert_eq!(results["hybrid"]["best"], serde_json::json!([0, 6]));
    assert!(untraced_report_numbers(&bundle).is_empty());
}

#[test]
fn narrow_window_exits_two_with_minimal_buffer() {
    let dir = tempfile::tempdir().unwrap();
    let case = gen_case(dir.path(), "t1.json", &["--mode", "tiny"]);
    let bundle = dir.path().join("bundle");
    let out = optimize(&case, &bundle, &["--buffer-bps", "1000"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible_u_cap"));
    let trace = read_json(&bundle.join("certifier_trace.json"));
    assert_eq!(trace["certification"]["status"], "INFEASIBLE");
    assert_eq!(trace["b_star"]["usd"].as_f64(), Some(7_000.0));
    assert_eq!(trace["b_star"]["bps"].as_f64(), Some(1_400.0));
    assert_eq!(trace["b_star"]["infeasible_u_cap"], Value::Bool(true));
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, b"{\"csa\": 3}").unwrap();
    let out = optimize(&bad, &dir.path().join("b"), &[]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
    let out = csaopt(&["validate", "--case", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn validate_and_bstar_print_json() {
    let dir = tempfile::tempdir().unwrap();
    let case = gen_case(dir.path(), "t1.json", &["--mode", "tiny"]);
    let out = csaopt(&["validate", "--case", case.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["r_eff"].as_f64(), Some(50_000.0));
    let out = csaopt(&["bstar", "--case", case.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["usd"].as_f64(), Some(7_000.0));
}

#[test]
fn certify_given_lots() {
    let dir = tempfile::tempdir().unwrap();
    let case = gen_case(dir.path(), "t1.json", &["--mode", "tiny"]);
    let out = csaopt(&["certify", "--case", case.to_str().unwrap(), "--lots", "1,5"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "OPTIMAL");
    assert_eq!(v["solution"], serde_json::json!([0, 6]));
    let out = csaopt(&["certify", "--case", case.to_str().unwrap(), "--lots", "1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn repeated_runs_give_identical_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let case = gen_case(dir.path(), "desk.json", &["--mode", "desk", "--seed", "7"]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&optimize(&case, &a, &[])), 0);
    assert_eq!(code(&optimize(&case, &b, &[])), 0);
    assert_eq!(bundle_difference(&a, &b), None);
    assert!(missing_classes(&a).is_empty());
    assert!(untraced_report_numbers(&a).is_empty(), "{:?}", untraced_report_numbers(&a));
    let out = csaopt(&["report", "--bundle", a.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
}

#[test]
fn sweep_writes_a_frontier() {
    let dir = tempfile::tempdir().unwrap();
    let case = gen_case(dir.path(), "t1.json", &["--mode", "tiny"]);
    let out_dir = dir.path().join("sweep");
    let out = csaopt(&[
        "sweep", "--case", case.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
        "--param", "buffer-bps", "--values", "1000,2000,4000",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let frontier = read_json(&out_dir.join("frontier.json"));
    let text = frontier.to_string();
    assert!(text.contains("INFEASIBLE") && text.contains("OPTIMAL"), "{text}");
}
