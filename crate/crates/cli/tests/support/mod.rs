//! Helpers for driving the binary and inspecting bundles.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub const ARTIFACT_CLASSES: [&str; 5] = [
    "valuation_audit.json",
    "weights_provenance.json",
    "qubo_manifest_",
    "certifier_trace.json",
    "results.json",
];

pub fn csaopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csaopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn gen_case(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend(["--out", path.to_str().unwrap()]);
    let out = csaopt(&full);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

pub fn optimize(case: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["optimize", "--case", case.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    csaopt(&args)
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// File name → bytes, with the run manifest's timestamps removed.
pub fn bundle_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = fs::read(&path).unwrap();
        if name == "run_manifest.json" {
            let mut v: Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("timestamps");
            bytes = serde_json::to_vec(&v).unwrap();
        }
        out.insert(name, bytes);
    }
    out
}

/// First differing file between two bundles, if any.
pub fn bundle_difference(a: &Path, b: &Path) -> Option<String> {
    let (a, b) = (bundle_bytes(a), bundle_bytes(b));
    if a.keys().ne(b.keys()) {
        return Some(format!("file sets differ: {:?} vs {:?}", a.keys(), b.keys()));
    }
    a.iter().find(|(k, v)| b[*k] != **v).map(|(k, _)| k.clone())
}

pub fn missing_classes(dir: &Path) -> Vec<&'static str> {
    let names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    ARTIFACT_CLASSES
        .iter()
        .copied()
        .filter(|c| !names.iter().any(|n| n.starts_with(c)))
        .collect()
}

fn collect_numbers(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.extend(n.as_f64()),
        Value::Array(a) => a.iter().for_each(|x| collect_numbers(x, out)),
        Value::Object(o) => o.values().for_each(|x| collect_numbers(x, out)),
        _ => {}
    }
}

/// Numbers in the report body that appear in no JSON artifact.
pub fn untraced_report_numbers(dir: &Path) -> Vec<String> {
    let mut known = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            collect_numbers(&read_json(&path), &mut known);
        }
    }
    let html = fs::read_to_string(dir.join("report.html")).unwrap();
    let body = match html.find("</style>") {
        Some(i) => &html[i..],
        None => &html[..],
    };
    let mut text = String::new();
    let mut in_tag = false;
    for ch in body.chars() {
        match ch {
            '<' => in_tag = true,
            '>' => {
                in_tag = false;
                text.push(' ');
            }
            c if !in_tag => text.push(c),
            _ => {}
        }
    }
    text.split(|c: char| c.is_whitespace() || c == '(' || c == ')' || c == ',' || c == '·')
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse::<f64>().ok().map(|x| (t, x)))
        .filter(|(_, x)| !known.iter().any(|k| (k - x).abs() <= 1e-9 * x.abs().max(1.0)))
        .map(|(t, _)| t.to_string())
        .collect()
}
