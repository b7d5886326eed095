//! Audit bundle: canonical JSON artifacts, a run manifest with content
//! hashes, and a static HTML report rendered from the artifacts alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::canonical::{canonical_hash, sha256_hex, to_canonical_bytes};
use crate::certifier::CertificationReport;
use crate::data_model::{serialize_case, SolverLimits};
use crate::error::Result;
use crate::explorer::HybridResult;
use crate::objective::{provenance_hash, ObjectiveBreakdown};
use crate::problem::Problem;
use crate::requirement::{is_feasible, Allocation, BStarReport};

pub const VALUATION_AUDIT: &str = "valuation_audit.json";
pub const WEIGHTS_PROVENANCE: &str = "weights_provenance.json";
pub const CERTIFIER_TRACE: &str = "certifier_trace.json";
pub const RESULTS: &str = "results.json";
pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const REPORT: &str = "report.html";

pub fn qubo_manifest_name(k: usize) -> String {
    format!("qubo_manifest_{k}.json")
}

/// One model's outcome as recorded in `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRun {
    pub name: String,
    pub allocation: Allocation,
    pub feasible: bool,
    pub breakdown: ObjectiveBreakdown,
}

impl ModelRun {
    pub fn evaluate(name: &str, x: &Allocation, p: &Problem) -> ModelRun {
        ModelRun {
            name: name.into(),
            allocation: x.clone(),
            feasible: is_feasible(p, &x.lots),
            breakdown: crate::objective::breakdown(x, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub solver_limits: SolverLimits,
    pub design_defaults: Value,
    pub input_hash: String,
    /// SHA-256 of every other artifact's bytes, by file name.
    pub artifact_hashes: BTreeMap<String, String>,
    pub timestamps: Timestamps,
}

pub struct BundleInputs<'a> {
    pub problem: &'a Problem,
    pub models: &'a [ModelRun],
    pub hybrid: Option<&'a HybridResult>,
    pub hybrid_error: Option<String>,
    pub certification: Option<&'a CertificationReport>,
    pub b_star: Option<&'a BStarReport>,
    pub limits: &'a SolverLimits,
    pub started: String,
}

fn design_defaults(inputs: &BundleInputs<'_>) -> Value {
    json!({
        "sa_params": inputs.hybrid.map(|h| h.sa_params),
        "sa_schedule": "T0 = 2 |J(seed)| / 100, cooling 0.95 per 50 moves, add/remove/swap 0.4/0.3/0.3",
        "plateau_rule": "relative best-J improvement below plateau_eps over plateau_window steps",
        "dual_proxy": "finite-difference unit-lot sensitivity",
        "edge_weight": "mean of shared-row binding level and |weighted loss correlation|",
        "hubo_encoding": "signed linear lot-delta bits 1, 2, .., -r; touch ancillas for k_max >= 3; Rosenberg reduction above k_max",
        "angle_search": "layerwise grid over [0, pi)^2 then Nelder-Mead; total budget split over layers",
        "sample_choice": "lowest feasible J over distinct repaired shots, lower energy on ties",
        "must_jump_shrink": "longest fitting run of the score-ranked subset, rotated by rejected jumps at the incumbent",
        "certifier": "depth-first branch-and-bound, separable convex relaxation plus CVaR at minimal losses",
        "b_star_exact": "exact minimal-overshoot search over covers",
    })
}

fn write_artifact<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T, hashes: &mut BTreeMap<String, String>) -> Result<()> {
    let bytes = to_canonical_bytes(value)?;
    hashes.insert(name.to_string(), sha256_hex(&bytes));
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

/// Writes every artifact plus `report.html` into `dir` and returns the
/// run manifest.
pub fn emit_bundle(dir: &Path, inputs: &BundleInputs<'_>) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let p = inputs.problem;
    let case = p.case();
    let mut hashes = BTreeMap::new();

    write_artifact(
        dir,
        VALUATION_AUDIT,
        &json!({
            "rows": p.valuation,
            "ineligible": p.ineligible,
            "r_eff": p.r_eff,
            "buffer": p.buffer,
            "hard_cap_enabled": p.hard_cap,
        }),
        &mut hashes,
    )?;

    let prov_hash = match &case.weights.provenance {
        Some(prov) => Some(provenance_hash(prov)?),
        None => None,
    };
    write_artifact(
        dir,
        WEIGHTS_PROVENANCE,
        &json!({
            "weights": {
                "lambda_movement": case.weights.lambda_movement,
                "mu_cvar": case.weights.mu_cvar,
                "gamma_overshoot": case.weights.gamma_overshoot,
            },
            "calibrated": case.weights.calibrated,
            "provenance": case.weights.provenance,
            "provenance_hash": prov_hash,
            "warnings": case.warnings(),
        }),
        &mut hashes,
    )?;

    if let Some(h) = inputs.hybrid {
        for m in &h.jump_manifests {
            write_artifact(dir, &qubo_manifest_name(m.index), m, &mut hashes)?;
        }
    }

    let b_star = inputs
        .b_star
        .or_else(|| inputs.certification.and_then(|c| c.b_star.as_ref()));
    write_artifact(
        dir,
        CERTIFIER_TRACE,
        &json!({
            "certification": inputs.certification,
            "b_star": b_star.map(|b| json!({
                "usd": b.reported(),
                "bps": b.b_star_bps,
                "infeasible_u_cap": b.infeasible_u_cap,
                "report": b,
            })),
        }),
        &mut hashes,
    )?;

    let bl3_j = inputs
        .models
        .iter()
        .find(|m| m.name == "BL-3")
        .map(|m| m.breakdown.j_total);
    let relative: BTreeMap<&str, Option<f64>> = inputs
        .models
        .iter()
        .map(|m| {
            let r = bl3_j.filter(|b| *b != 0.0).map(|b| m.breakdown.j_total / b);
            (m.name.as_str(), r)
        })
        .collect();
    write_artifact(
        dir,
        RESULTS,
        &json!({
            "models": inputs.models,
            "relative_j_vs_bl3": relative,
            "hybrid": inputs.hybrid.map(|h| json!({
                "seed": h.seed,
                "seed_j": h.seed_j,
                "best": h.best,
                "trace": h.trace,
                "jumps": h.jump_manifests.len(),
            })),
            "hybrid_error": inputs.hybrid_error,
            "instrument_ids": (0..p.len()).map(|i| p.item_id(i)).collect::<Vec<_>>(),
        }),
        &mut hashes,
    )?;

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: inputs.limits.seed,
        solver_limits: inputs.limits.clone(),
        design_defaults: design_defaults(inputs),
        input_hash: sha256_hex(&serialize_case(case)?),
        artifact_hashes: hashes,
        timestamps: Timestamps {
            started: inputs.started.clone(),
            finished: now(),
        },
    };
    fs::write(dir.join(RUN_MANIFEST), to_canonical_bytes(&manifest)?)?;
    write_report(dir)?;
    Ok(manifest)
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Checks every recorded artifact hash against the files on disk.
pub fn verify_bundle(dir: &Path) -> Result<Vec<String>> {
    let manifest: Value = serde_json::from_slice(&fs::read(dir.join(RUN_MANIFEST))?)?;
    let mut bad = Vec::new();
    if let Some(hashes) = manifest["artifact_hashes"].as_object() {
        for (name, h) in hashes {
            let ok = fs::read(dir.join(name)).map(|b| sha256_hex(&b) == h.as_str().unwrap_or(""));
            if !matches!(ok, Ok(true)) {
                bad.push(name.clone());
            }
        }
    }
    Ok(bad)
}

/// Hash of the canonical form of any value (used for input fingerprints).
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    canonical_hash(value)
}

fn load(dir: &Path, name: &str) -> std::result::Result<Value, String> {
    let bytes = fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
    serde_json::from_slice(&bytes).map_err(|e| format!("{name}: {e}"))
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "–".into(),
        Value::String(s) => esc(s),
        other => esc(&other.to_string()),
    }
}

fn missing(out: &mut String, title: &str, err: &str) {
    let _ = write!(
        out,
        "<section><h2>{}</h2><p class=\"warn\">artifact unavailable: {}</p></section>\n",
        esc(title),
        esc(err)
    );
}

fn table(out: &mut String, head: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
    out.push_str("<table><tr>");
    for h in head {
        let _ = write!(out, "<th>{}</th>", esc(h));
    }
    out.push_str("</tr>\n");
    for r in rows {
        out.push_str("<tr>");
        for c in r {
            let _ = write!(out, "<td>{c}</td>");
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n");
}

/// Static page built only from the artifacts in `dir`; a missing or
/// unreadable artifact becomes a placeholder section.
pub fn render_report(dir: &Path) -> String {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Collateral allocation run</title>\n\
         <style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse;margin:1em 0}\
         td,th{border:1px solid #999;padding:2px 8px;text-align:right}.warn{background:#fee;padding:6px}</style>\n\
         </head><body>\n<h1>Collateral allocation run</h1>\n",
    );

    let weights = load(dir, WEIGHTS_PROVENANCE);
    if let Ok(w) = &weights {
        for msg in w["warnings"].as_array().into_iter().flatten() {
            let _ = writeln!(out, "<p class=\"warn\">warning: {}</p>", cell(msg));
        }
    }

    match load(dir, RESULTS) {
        Ok(r) => {
            out.push_str("<section><h2>Objective breakdown</h2>\n");
            let rel = &r["relative_j_vs_bl3"];
            let rows = r["models"].as_array().cloned().unwrap_or_default().into_iter().map(|m| {
                let b = &m["breakdown"];
                let name = m["name"].as_str().unwrap_or("").to_string();
                vec![
                    esc(&name),
                    cell(&m["feasible"]),
                    cell(&b["base_cost_abs"]),
                    cell(&b["movement_lots"]),
                    cell(&b["lambda_movement"]),
                    cell(&b["cvar_value"]),
                    cell(&b["mu_cvar"]),
                    cell(&b["overshoot_value"]),
                    cell(&b["gamma_overshoot"]),
                    cell(&b["j_total"]),
                    cell(&rel[name.as_str()]),
                ]
            });
            table(
                &mut out,
                &["model", "feasible", "base cost", "movement (lots)", "λ·movement", "CVaR", "μ·CVaR", "overshoot", "γ·overshoot", "J", "J / J(BL-3)"],
                rows,
            );
            if let Some(e) = r["hybrid_error"].as_str() {
                let _ = writeln!(out, "<p class=\"warn\">hybrid: {}</p>", esc(e));
            }
            out.push_str("</section>\n");
        }
        Err(e) => missing(&mut out, "Objective breakdown", &e),
    }

    match load(dir, VALUATION_AUDIT) {
        Ok(v) => {
            out.push_str("<section><h2>Valuation audit</h2>\n");
            let rows = v["rows"].as_array().cloned().unwrap_or_default().into_iter().map(|r| {
                vec![
                    cell(&r["instrument"]),
                    cell(&r["icad"]),
                    cell(&r["bucket"]),
                    cell(&r["regime"]),
                    cell(&r["haircut_pct"]),
                    cell(&r["lot_value"]),
                ]
            });
            table(&mut out, &["instrument", "ICAD", "bucket", "regime", "haircut", "lot value"], rows);
            let inel = v["ineligible"].as_array().cloned().unwrap_or_default();
            if !inel.is_empty() {
                table(
                    &mut out,
                    &["ineligible instrument", "reason"],
                    inel.iter().map(|r| vec![cell(&r["instrument"]), cell(&r["reason"])]),
                );
            }
            let _ = writeln!(
                out,
                "<p>R_eff {} · buffer {} · hard cap {}</p>",
                cell(&v["r_eff"]),
                cell(&v["buffer"]),
                cell(&v["hard_cap_enabled"])
            );
            out.push_str("</section>\n");
        }
        Err(e) => missing(&mut out, "Valuation audit", &e),
    }

    match &weights {
        Ok(w) => {
            out.push_str("<section><h2>Weights</h2>\n");
            let ws = &w["weights"];
            table(
                &mut out,
                &["λ (movement)", "μ (CVaR)", "γ (overshoot)", "calibrated", "provenance hash"],
                [vec![
                    cell(&ws["lambda_movement"]),
                    cell(&ws["mu_cvar"]),
                    cell(&ws["gamma_overshoot"]),
                    cell(&w["calibrated"]),
                    cell(&w["provenance_hash"]),
                ]],
            );
            if let Some(prov) = w["provenance"].as_object() {
                table(&mut out, &["input", "value"], prov.iter().map(|(k, v)| vec![esc(k), cell(v)]));
            }
            out.push_str("</section>\n");
        }
        Err(e) => missing(&mut out, "Weights", e),
    }

    out.push_str("<section><h2>Jump timeline</h2>\n");
    let mut jumps: Vec<(usize, Value)> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().to_string();
            let k = name.strip_prefix("qubo_manifest_")?.strip_suffix(".json")?.parse().ok()?;
            load(dir, &name).ok().map(|v| (k, v))
        })
        .collect();
    jumps.sort_by_key(|(k, _)| *k);
    if jumps.is_empty() {
        out.push_str("<p>no jumps fired</p>\n");
    } else {
        let rows = jumps.iter().map(|(k, m)| {
            vec![
                k.to_string(),
                cell(&m["iteration"]),
                cell(&Value::String(
                    m["subset"].as_array().map(|s| s.iter().filter_map(|x| x.as_str()).collect::<Vec<_>>().join(", ")).unwrap_or_default(),
                )),
                cell(&m["width"]),
                cell(&m["k"]),
                cell(&m["j_before"]),
                cell(&m["j_after"]),
                cell(&m["accepted"]),
                cell(&m["reason"]),
            ]
        });
        table(&mut out, &["#", "iteration", "subset", "width", "order", "J before", "J after", "accepted", "reason"], rows);
    }
    out.push_str("</section>\n");

    match load(dir, CERTIFIER_TRACE) {
        Ok(t) => {
            out.push_str("<section><h2>Certification</h2>\n");
            let c = &t["certification"];
            if c.is_null() {
                out.push_str("<p>certifier not run</p>\n");
            } else {
                table(
                    &mut out,
                    &["status", "incumbent J", "best bound", "gap", "nodes", "limit reached"],
                    [vec![
                        cell(&c["status"]),
                        cell(&c["incumbent_j"]),
                        cell(&c["best_bound"]),
                        cell(&c["gap"]),
                        cell(&c["nodes_explored"]),
                        cell(&c["limit_reached"]),
                    ]],
                );
                if let Some(sl) = c["slacks"].as_object() {
                    table(&mut out, &["constraint", "slack"], sl.iter().map(|(k, v)| vec![esc(k), cell(v)]));
                }
            }
            let b = &t["b_star"];
            if !b.is_null() {
                let _ = writeln!(
                    out,
                    "<p>B* {} ({} bps){}</p>",
                    cell(&b["usd"]),
                    cell(&b["bps"]),
                    if b["infeasible_u_cap"].as_bool() == Some(true) { " · infeasible_u_cap" } else { "" }
                );
            }
            out.push_str("</section>\n");
        }
        Err(e) => missing(&mut out, "Certification", &e),
    }
    out.push_str("</body></html>\n");
    out
}

pub fn write_report(dir: &Path) -> Result<PathBuf> {
    let path = dir.join(REPORT);
    fs::write(&path, render_report(dir))?;
    Ok(path)
}
