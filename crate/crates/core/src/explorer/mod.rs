//! Phase 1: simulated annealing with feasibility repair, interleaved with
//! micro HO-QAOA jumps on spectrally selected sub-problems when the best
//! objective plateaus.

mod anneal;
mod graph;
mod repair;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use anneal::{anneal, Annealer, SaParams};
pub use graph::{build_interaction_graph, spectral_select, GraphEdge, GraphNode, InteractionGraph};
pub use repair::{repair, violation, RepairOutcome};

use crate::baselines::{bl2_bucket_first, bl3_two_opt, bl3_with_repair};
use crate::certifier::min_overshoot_exact;
use crate::data_model::SolverLimits;
use crate::error::{Error, Result};
use crate::hubo::{bits_of, build_hubo, map_lots, Hubo, QuboManifest};
use crate::objective::{breakdown, j_value, ObjectiveBreakdown};
use crate::problem::Problem;
use crate::qaoa_sim::{energy_table, evolve_with_energies, optimize_angles, sample, Angles};
use crate::requirement::{is_feasible, min_buffer, Allocation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    SaAccept,
    SaReject,
    JumpAccept,
    JumpReject,
    JumpSkip,
    Repair,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub iteration: u64,
    pub j: f64,
    pub event: TraceKind,
}

impl TraceEvent {
    pub fn new(iteration: u64, j: f64, event: TraceKind) -> TraceEvent {
        TraceEvent { iteration, j, event }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridResult {
    pub best: Allocation,
    pub best_breakdown: ObjectiveBreakdown,
    pub seed: Allocation,
    pub seed_j: f64,
    pub sa_params: SaParams,
    pub trace: Vec<TraceEvent>,
    pub jump_manifests: Vec<QuboManifest>,
}

impl HybridResult {
    pub fn best_j(&self) -> f64 {
        self.best_breakdown.j_total
    }
}

/// Result of one jump attempt around an incumbent.
#[derive(Debug, Clone)]
pub struct JumpAttempt {
    /// One manifest per model considered (a width skip followed by a
    /// forced, shrunken attempt yields two).
    pub manifests: Vec<QuboManifest>,
    /// Feasible, strictly improving candidate.
    pub improved: Option<(Allocation, f64)>,
    pub angles: Option<Angles<f64>>,
}

fn skip_manifest(limits: &SolverLimits, subset: Vec<String>, j_inc: f64, reason: String) -> QuboManifest {
    let mut m = QuboManifest::for_model(&Hubo::<f64>::from_spin_terms(0, Default::default(), 0.0), limits);
    m.subset = subset;
    m.width = 0;
    m.penalty_weights = None;
    m.j_before = j_inc;
    m.reason = reason;
    m
}

/// One micro jump: interaction graph around `x_inc`, spectral subset,
/// sub-HUBO, width gate, angle search, sampling, decoding and repair.
///
/// Under `must_jump` an over-wide subset is shrunk to the longest run of
/// consecutive items, in score order starting at position `offset`
/// (wrapping), whose model fits.
pub fn micro_jump(
    p: &Problem,
    x_inc: &Allocation,
    limits: &SolverLimits,
    warm: Option<&Angles<f64>>,
    offset: usize,
    rng: &mut ChaCha8Rng,
) -> JumpAttempt {
    let j_inc = j_value(p, &x_inc.lots);
    let mut out = JumpAttempt { manifests: Vec::new(), improved: None, angles: None };
    let g = build_interaction_graph(p, x_inc, limits.edge_eps);
    let subset = spectral_select(&g, limits.n_max);
    let ids = |s: &[usize]| s.iter().map(|&i| p.item_id(i).to_string()).collect::<Vec<_>>();
    if subset.is_empty() {
        out.manifests.push(skip_manifest(limits, Vec::new(), j_inc, "empty interaction graph".into()));
        return out;
    }
    let mut h = match build_hubo(p, x_inc, &subset, limits) {
        Ok(h) => h,
        Err(e) => {
            out.manifests.push(skip_manifest(limits, ids(&subset), j_inc, e.to_string()));
            return out;
        }
    };
    if h.width > limits.n_max {
        let mut m = QuboManifest::for_model(&h, limits);
        m.j_before = j_inc;
        m.reason = format!("ancilla width {} exceeds n_max {}", h.width, limits.n_max);
        out.manifests.push(m);
        if !limits.must_jump {
            return out;
        }
        let mut ranked = subset.clone();
        ranked.rotate_left(offset % subset.len());
        let shrunk = (1..ranked.len()).rev().find_map(|len| {
            build_hubo(p, x_inc, &ranked[..len], limits)
                .ok()
                .filter(|h| h.width <= limits.n_max)
        });
        match shrunk {
            Some(s) => h = s,
            None => return out,
        }
    }

    let mut manifest = QuboManifest::for_model(&h, limits);
    manifest.n = h.width;
    manifest.j_before = j_inc;
    // Angle search runs on a unit-scale copy of the model.
    let scale = h.terms.values().fold(0.0f64, |a, c| a.max(c.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut unit = h.clone();
    unit.terms.values_mut().for_each(|c| *c /= scale);
    unit.constant /= scale;

    let search = match optimize_angles(&unit, limits.depth_p, limits.angle_budget, warm, rng) {
        Ok(s) => s,
        Err(e) => {
            manifest.reason = e.to_string();
            out.manifests.push(manifest);
            return out;
        }
    };
    let energies = energy_table(&unit).expect("width checked");
    let state = evolve_with_energies(&energies, unit.width, &search.angles);
    let shots = sample(&state, limits.shots, rng);
    // Best-of-shots: every distinct sample is decoded, repaired and spliced
    // into the incumbent; the lowest feasible J wins, ties by energy.
    let mut distinct = shots;
    distinct.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(a.cmp(&b)));
    distinct.dedup();
    let mut chosen: Option<(usize, Allocation, f64)> = None;
    for &z in &distinct {
        let decoded = map_lots(&bits_of(z, h.width), &h, x_inc);
        let repaired = repair(&decoded, p).allocation;
        let mut candidate = x_inc.clone();
        for e in &h.items {
            candidate.lots[e.index] = repaired.lots[e.index];
        }
        if !is_feasible(p, &candidate.lots) {
            continue;
        }
        let j = j_value(p, &candidate.lots);
        if chosen.as_ref().map_or(true, |c| j < c.2) {
            chosen = Some((z, candidate, j));
        }
    }
    let feasible = chosen.is_some();
    let (best, candidate, j_new) = chosen.unwrap_or_else(|| {
        let z = distinct[0];
        let decoded = map_lots(&bits_of(z, h.width), &h, x_inc);
        let j = j_value(p, &decoded.lots);
        (z, decoded, j)
    });

    manifest.gammas = search.angles.gammas.clone();
    manifest.betas = search.angles.betas.clone();
    manifest.expected_energy = Some(search.energy * scale);
    manifest.sample_energy = Some(energies[best] * scale);
    manifest.j_after = Some(j_new);
    if feasible && j_new < j_inc {
        manifest.accepted = true;
        manifest.reason = "feasible and J decreased".into();
        out.improved = Some((candidate, j_new));
        out.angles = Some(search.angles);
    } else {
        manifest.reason = if feasible {
            "J did not decrease".into()
        } else {
            "repair could not restore feasibility".into()
        };
    }
    out.manifests.push(manifest);
    out
}

fn record(out: &mut Vec<QuboManifest>, mut m: QuboManifest, iteration: u64) {
    m.index = out.len();
    m.iteration = iteration;
    out.push(m);
}

/// BL-2, then the minimal-buffer covers (greedy, exact) when they fit the
/// window.
fn fallback_seed(p: &Problem, limits: &SolverLimits) -> Result<Allocation> {
    let bl2 = bl2_bucket_first(p);
    if is_feasible(p, &bl2.lots) {
        return Ok(bl2);
    }
    let diag = match min_buffer(p, limits.exact_bstar) {
        Ok(b) => {
            if is_feasible(p, &b.greedy_cover) {
                return Ok(Allocation::new(b.greedy_cover));
            }
            serde_json::to_string(&b)?
        }
        Err(e) => e.to_string(),
    };
    if let Ok(Some((_, x))) = min_overshoot_exact(p) {
        if is_feasible(p, &x.lots) {
            return Ok(bl3_two_opt(p, &x));
        }
    }
    Err(Error::NoFeasible(diag))
}

/// Seed from BL-3 over BL-1 (repaired if needed), then anneal with plateau-triggered jumps.
pub fn hybrid_optimize(p: &Problem, limits: &SolverLimits) -> Result<HybridResult> {
    let start = Instant::now();
    let mut seed = bl3_with_repair(p);
    let mut trace = Vec::new();
    if !is_feasible(p, &seed.lots) {
        seed = fallback_seed(p, limits)?;
        trace.push(TraceEvent::new(0, j_value(p, &seed.lots), TraceKind::Repair));
    }
    let seed_j = j_value(p, &seed.lots);
    let params = SaParams::for_seed_value(seed_j);
    let finish = |best: Allocation, trace, jump_manifests| HybridResult {
        best_breakdown: breakdown(&best, p),
        best,
        seed: seed.clone(),
        seed_j,
        sa_params: params,
        trace,
        jump_manifests,
    };
    if limits.wall_seconds <= 0.0 {
        return Ok(finish(seed.clone(), trace, Vec::new()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(limits.seed);
    let mut sa = Annealer::new(p, seed.lots.clone(), params);
    let mut manifests = Vec::new();
    let mut warm: Option<Angles<f64>> = None;
    let mut window_best = sa.best_j;
    let mut in_window = 0u64;
    // Rejected jumps at the current incumbent; rotates the shrink window.
    let mut rejected_here = (Vec::new(), 0usize);
    for it in 1..=limits.sa_iterations {
        if start.elapsed().as_secs_f64() >= limits.wall_seconds {
            break;
        }
        let kind = sa.step(p, &mut rng);
        trace.push(TraceEvent::new(it, sa.current_j, kind));
        in_window += 1;
        if in_window < limits.plateau_window {
            continue;
        }
        let gain = (window_best - sa.best_j) / window_best.abs().max(f64::MIN_POSITIVE);
        if limits.jumps_enabled && gain < limits.plateau_eps {
            let x_inc = Allocation::new(sa.best.clone());
            if rejected_here.0 != x_inc.lots {
                rejected_here = (x_inc.lots.clone(), 0);
            }
            let attempt = micro_jump(p, &x_inc, limits, warm.as_ref(), rejected_here.1, &mut rng);
            let attempted = attempt.manifests.iter().any(|m| m.n > 0);
            for m in attempt.manifests {
                record(&mut manifests, m, it);
            }
            match attempt.improved {
                Some((y, j)) => {
                    sa.reset_to(y.lots, j);
                    warm = attempt.angles;
                    trace.push(TraceEvent::new(it, j, TraceKind::JumpAccept));
                }
                None => {
                    rejected_here.1 += 1;
                    let kind = if attempted { TraceKind::JumpReject } else { TraceKind::JumpSkip };
                    trace.push(TraceEvent::new(it, sa.current_j, kind));
                }
            }
        }
        window_best = sa.best_j;
        in_window = 0;
    }
    Ok(finish(Allocation::new(sa.best), trace, manifests))
}
