//! Exhaustive reference evaluation written independently of the library's
//! objective and feasibility code. Only the resolved problem data (lot
//! values, carry, caps, losses) is shared.

#![allow(dead_code)]

pub mod qaoa;
pub mod semantics;

use csaopt_core::data_model::CapLimit;
use csaopt_core::Problem;

/// CVaR as the minimum over breakpoints τ ∈ {ℓ_s} of
/// τ + Σ w_s (ℓ_s − τ)₊ / (1 − α).
pub fn cvar_breakpoints(losses: &[f64], weights: &[f64], alpha: f64) -> f64 {
    losses
        .iter()
        .map(|&tau| {
            tau + losses
                .iter()
                .zip(weights)
                .map(|(&l, &w)| w * (l - tau).max(0.0))
                .sum::<f64>()
                / (1.0 - alpha)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn coverage_cents(p: &Problem, x: &[u32]) -> i64 {
    x.iter().zip(&p.values).map(|(&k, v)| k as i64 * v.0).sum()
}

pub fn caps_ok(p: &Problem, x: &[u32], u: i64) -> bool {
    p.caps.iter().all(|c| {
        let lhs: i64 = c.members.iter().map(|&i| x[i] as i64 * p.values[i].0).sum();
        match c.limit {
            CapLimit::Absolute(m) => lhs <= m.0,
            CapLimit::FractionOfU(f) => lhs as i128 * 1_000_000_000 <= f.0 as i128 * u as i128,
        }
    })
}

pub fn feasible(p: &Problem, x: &[u32]) -> bool {
    let u = coverage_cents(p, x);
    if !caps_ok(p, x, u) {
        return false;
    }
    let top = p.r_eff.0 + p.buffer.0;
    let in_window = u >= p.r_eff.0 && (!p.hard_cap || u <= top);
    let gap = if u < p.r_eff.0 {
        p.r_eff.0 - u
    } else if p.hard_cap && u > top {
        u - top
    } else {
        0
    };
    in_window || (x == p.holdings.as_slice() && gap < p.mta.0)
}

pub fn objective(p: &Problem, x: &[u32]) -> f64 {
    let base: f64 = x.iter().zip(&p.carry).map(|(&k, c)| c * k as f64).sum();
    let moved: i64 = x.iter().zip(&p.holdings).map(|(&k, &h)| (k as i64 - h as i64).abs()).sum();
    let over = (coverage_cents(p, x) - p.r_eff.0).max(0) as f64 / 100.0;
    let mut j = base + p.lambda * moved as f64 + p.gamma * over;
    if p.mu != 0.0 {
        let n = p.len();
        let losses: Vec<f64> = p
            .losses
            .chunks(n)
            .map(|row| row.iter().zip(x).map(|(l, &k)| l * k as f64).sum())
            .collect();
        j += p.mu * cvar_breakpoints(&losses, &p.scenario_weights, p.alpha);
    }
    j
}

/// Calls `f` on every lot vector in the box `0 ≤ x ≤ upper`.
pub fn for_each_vector(upper: &[u32], mut f: impl FnMut(&[u32])) {
    let mut x = vec![0u32; upper.len()];
    loop {
        f(&x);
        let mut k = 0;
        loop {
            if k == x.len() {
                return;
            }
            if x[k] < upper[k] {
                x[k] += 1;
                break;
            }
            x[k] = 0;
            k += 1;
        }
    }
}

pub struct Exhaustive {
    /// Minimal J over feasible vectors and one minimizer.
    pub best: Option<(Vec<u32>, f64)>,
    /// Minimal U − R_eff (cents) over covers that keep the caps, ignoring
    /// the coverage cap.
    pub min_overshoot: Option<i64>,
    pub feasible_count: u64,
}

pub fn exhaustive(p: &Problem) -> Exhaustive {
    let mut out = Exhaustive { best: None, min_overshoot: None, feasible_count: 0 };
    for_each_vector(&p.upper, |x| {
        let u = coverage_cents(p, x);
        if u >= p.r_eff.0 && caps_ok(p, x, u) {
            let o = u - p.r_eff.0;
            if out.min_overshoot.map_or(true, |m| o < m) {
                out.min_overshoot = Some(o);
            }
        }
        if feasible(p, x) {
            out.feasible_count += 1;
            let j = objective(p, x);
            if out.best.as_ref().map_or(true, |(_, b)| j < *b) {
                out.best = Some((x.to_vec(), j));
            }
        }
    });
    out
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
