//! Checks on explorer runs and exact frontiers, shared by the integration
//! tests and the acceptance harness.

use csaopt_core::certifier::brute_force;
use csaopt_core::explorer::{micro_jump, HybridResult, TraceKind};
use csaopt_core::{Problem, SolverLimits};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn is_jump(k: TraceKind) -> bool {
    matches!(k, TraceKind::JumpAccept | TraceKind::JumpReject | TraceKind::JumpSkip)
}

/// Replays the trace: a jump must fire exactly at window ends whose
/// relative best-J gain fell below `plateau_eps`, and an accepted jump
/// must lower the best J.
pub fn plateau_gating(r: &HybridResult, limits: &SolverLimits) -> Result<(), String> {
    let s = limits.plateau_window;
    let mut best = r.seed_j;
    let mut window_best = r.seed_j;
    let events: Vec<_> = r.trace.iter().filter(|e| e.event != TraceKind::Repair).collect();
    let mut k = 0;
    while k < events.len() {
        let e = events[k];
        if is_jump(e.event) {
            return Err(format!("jump at {} without a window end", e.iteration));
        }
        best = best.min(e.j);
        k += 1;
        if e.iteration % s != 0 {
            continue;
        }
        let gain = (window_best - best) / window_best.abs().max(f64::MIN_POSITIVE);
        let expect = limits.jumps_enabled && gain < limits.plateau_eps;
        let next = events.get(k).filter(|n| is_jump(n.event) && n.iteration == e.iteration);
        if next.is_some() != expect {
            return Err(format!("window ending at {} (gain {gain}): jump {}", e.iteration, next.is_some()));
        }
        if let Some(j) = next {
            if j.event == TraceKind::JumpAccept && j.j >= best {
                return Err(format!("accepted jump at {} did not lower J", j.iteration));
            }
            best = best.min(j.j);
            k += 1;
        }
        window_best = best;
    }
    Ok(())
}

/// Rejected and skipped jumps leave the annealer state where it was.
pub fn revert_on_reject(r: &HybridResult) -> Result<(), String> {
    for w in r.trace.windows(2) {
        if matches!(w[1].event, TraceKind::JumpReject | TraceKind::JumpSkip) && w[1].j != w[0].j {
            return Err(format!("state moved on a rejected jump at {}", w[1].iteration));
        }
    }
    for m in r.jump_manifests.iter().filter(|m| !m.accepted) {
        if let Some(j) = m.j_after {
            if j < m.j_before && !m.reason.contains("feasibility") {
                return Err(format!("improving feasible jump {} was rejected", m.index));
            }
        }
    }
    Ok(())
}

/// Number of accepted jumps; errors if any did not strictly lower J.
pub fn strict_decrease(r: &HybridResult) -> Result<usize, String> {
    let mut n = 0;
    for m in r.jump_manifests.iter().filter(|m| m.accepted) {
        n += 1;
        match m.j_after {
            Some(j) if j < m.j_before => {}
            other => return Err(format!("jump {} accepted with J {:?} vs {}", m.index, other, m.j_before)),
        }
    }
    Ok(n)
}

/// With `must_jump` off, an over-wide model is skipped without simulation.
pub fn width_skip(r: &HybridResult, n_max: usize) -> Result<(), String> {
    if !r.trace.iter().any(|e| e.event == TraceKind::JumpSkip) {
        return Err("no jump_skip logged".into());
    }
    if r.trace.iter().any(|e| matches!(e.event, TraceKind::JumpAccept | TraceKind::JumpReject)) {
        return Err("an over-wide jump was simulated".into());
    }
    if !r.jump_manifests.iter().all(|m| m.n == 0 && !m.accepted && m.gammas.is_empty()) {
        return Err("skip manifest records a simulation".into());
    }
    if !r.jump_manifests.iter().any(|m| m.width > n_max && m.reason.contains("n_max")) {
        return Err("no manifest records the width gate".into());
    }
    Ok(())
}

/// A jump at the exact optimum can never be accepted.
pub fn optimum_is_stable(p: &Problem, limits: &SolverLimits, seed: u64) -> Result<(), String> {
    let (opt, j_opt) = brute_force(p).map_err(|e| e.to_string())?.ok_or("no feasible point")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for offset in 0..3 {
        let attempt = micro_jump(p, &opt, limits, None, offset, &mut rng);
        if attempt.improved.is_some() || attempt.manifests.iter().any(|m| m.accepted) {
            return Err("jump accepted at the optimum".into());
        }
        if attempt.manifests.iter().any(|m| m.j_before != j_opt) {
            return Err("manifest J differs from the incumbent".into());
        }
    }
    Ok(())
}

pub const GAMMAS: [f64; 5] = [0.0, 1e-5, 1e-4, 1e-3, 1e-2];
pub const MUS: [f64; 5] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1];

fn base_cost(p: &Problem, x: &[u32]) -> f64 {
    x.iter().zip(&p.carry).map(|(&k, c)| c * k as f64).sum()
}

fn tail_risk(p: &Problem, x: &[u32]) -> f64 {
    let losses: Vec<f64> = p
        .losses
        .chunks(p.len())
        .map(|row| row.iter().zip(x).map(|(l, &k)| l * k as f64).sum())
        .collect();
    super::cvar_breakpoints(&losses, &p.scenario_weights, p.alpha)
}

/// Exact optima over the γ grid with λ = μ = 0: overshoot must not rise
/// and base cost must not fall. Returns whether the optimum moved.
pub fn gamma_frontier(mut p: Problem) -> Result<bool, String> {
    p.lambda = 0.0;
    p.mu = 0.0;
    let mut points = Vec::new();
    for g in GAMMAS {
        p.gamma = g;
        let (x, _) = brute_force(&p).map_err(|e| e.to_string())?.ok_or("infeasible")?;
        let over = (super::coverage_cents(&p, &x.lots) - p.r_eff.0).max(0);
        points.push((over, base_cost(&p, &x.lots)));
    }
    for w in points.windows(2) {
        if w[1].0 > w[0].0 || w[1].1 < w[0].1 - 1e-9 * w[0].1.abs().max(1.0) {
            return Err(format!("γ frontier not monotone: {points:?}"));
        }
    }
    Ok(points[0] != points[4])
}

/// Exact optima over the μ grid with λ = γ = 0: CVaR must not rise.
pub fn mu_frontier(mut p: Problem) -> Result<bool, String> {
    p.lambda = 0.0;
    p.gamma = 0.0;
    let mut risks = Vec::new();
    for m in MUS {
        p.mu = m;
        let (x, _) = brute_force(&p).map_err(|e| e.to_string())?.ok_or("infeasible")?;
        risks.push(tail_risk(&p, &x.lots));
    }
    for w in risks.windows(2) {
        if w[1] > w[0] + 1e-9 * w[0].abs().max(1.0) {
            return Err(format!("μ frontier not monotone: {risks:?}"));
        }
    }
    Ok(risks[0] != risks[4])
}
