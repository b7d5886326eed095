use serde::Serialize;

use crate::baselines::density_cmp;
use crate::problem::Problem;
use crate::requirement::{caps_hold, fill_toward, is_feasible, lot_fits_caps, Allocation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairOutcome {
    pub allocation: Allocation,
    pub feasible: bool,
    pub changed: bool,
}

/// Total constraint violation in currency units; zero exactly when
/// coverage, window and caps all hold. Lot bounds are not included.
pub fn violation(p: &Problem, lots: &[u32]) -> f64 {
    let u = p.coverage(lots);
    let mut v = (p.r_eff - u).positive_part().units();
    if let Some(top) = p.window_top() {
        v += (u - top).positive_part().units();
    }
    for cap in &p.caps {
        let s = cap.slack_units(p.group_value(cap, lots), u);
        if s < 0.0 {
            v -= s;
        }
    }
    v
}

fn score(p: &Problem, lots: &[u32]) -> f64 {
    if is_feasible(p, lots) {
        0.0
    } else {
        violation(p, lots).max(f64::MIN_POSITIVE)
    }
}

/// Deterministic projection toward feasibility:
/// 1. while a cap is violated, drop one lot of the worst-density member of
///    the most violated cap;
/// 2. while U < R_eff, add one lot of the best-density item that keeps the
///    caps (judged at max(U, R_eff) when nothing fits at U), preferring
///    lots that stay under the U-cap;
/// 3. while U > R_eff + B, drop one lot of the worst-density item whose
///    removal keeps U ≥ R_eff and the caps.
///
/// Passes repeat while they strictly reduce the violation; the least
/// violating iterate is returned, so `repair` is idempotent.
pub fn repair(x: &Allocation, p: &Problem) -> RepairOutcome {
    let mut cur: Vec<u32> = x
        .lots
        .iter()
        .zip(&p.upper)
        .map(|(&xi, &m)| xi.min(m))
        .collect();
    let mut cur_score = score(p, &cur);
    while cur_score > 0.0 {
        let (next, next_score) = repair_pass(p, &cur, cur_score);
        if next_score >= cur_score {
            break;
        }
        cur = next;
        cur_score = next_score;
    }
    RepairOutcome {
        changed: cur != x.lots,
        feasible: cur_score == 0.0,
        allocation: Allocation::new(cur),
    }
}

fn repair_pass(p: &Problem, start: &[u32], start_score: f64) -> (Vec<u32>, f64) {
    let n = p.len();
    let mut cur = start.to_vec();
    let mut best = (start.to_vec(), start_score);
    let record = |cur: &[u32], best: &mut (Vec<u32>, f64)| {
        let s = score(p, cur);
        if s < best.1 {
            *best = (cur.to_vec(), s);
        }
        s == 0.0
    };
    let worst_first = |a: &usize, b: &usize| density_cmp(p, *b, *a);

    // 1. caps
    loop {
        let u = p.coverage(&cur);
        let worst = p
            .caps
            .iter()
            .map(|c| (c, c.slack_units(p.group_value(c, &cur), u)))
            .filter(|(c, s)| *s < 0.0 && !c.admits(p.group_value(c, &cur), u))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((cap, _)) = worst else { break };
        let Some(i) = cap
            .members
            .iter()
            .copied()
            .filter(|&i| cur[i] > 0)
            .min_by(worst_first)
        else {
            break;
        };
        cur[i] -= 1;
        if record(&cur, &mut best) {
            return best;
        }
    }

    // 2. coverage
    loop {
        let u = p.coverage(&cur);
        if u >= p.r_eff {
            break;
        }
        let mut fits: Option<usize> = None;
        let mut any: Option<usize> = None;
        let toward = fill_toward(p, &mut cur, u);
        for i in 0..n {
            if !lot_fits_caps(p, &mut cur, i, u, toward) {
                continue;
            }
            let next = u + p.values[i];
            let pick = |slot: &mut Option<usize>| {
                if slot.map_or(true, |b| density_cmp(p, i, b).is_lt()) {
                    *slot = Some(i);
                }
            };
            pick(&mut any);
            if p.window_top().map_or(true, |top| next <= top) {
                pick(&mut fits);
            }
        }
        let Some(i) = fits.or(any) else { break };
        cur[i] += 1;
        if record(&cur, &mut best) {
            return best;
        }
    }

    // 3. window
    if let Some(top) = p.window_top() {
        loop {
            let u = p.coverage(&cur);
            if u <= top {
                break;
            }
            let candidate = (0..n)
                .filter(|&i| {
                    if cur[i] == 0 {
                        return false;
                    }
                    let next = u - p.values[i];
                    if next < p.r_eff {
                        return false;
                    }
                    let mut trial = cur.clone();
                    trial[i] -= 1;
                    caps_hold(p, &trial, next)
                })
                .min_by(worst_first);
            let Some(i) = candidate else { break };
            cur[i] -= 1;
            if record(&cur, &mut best) {
                return best;
            }
        }
    }
    best
}
