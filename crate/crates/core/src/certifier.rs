//! Exact certification by branch-and-bound over integer lot boxes, the
//! U-cap pre-check, and exhaustive oracles for small instances.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::Serialize;

use crate::data_model::{CapLimit, SolverLimits};
use crate::error::{Error, Result};
use crate::money::Money;
use crate::objective::{breakdown, cvar_of_losses, j_value, ObjectiveBreakdown};
use crate::problem::Problem;
use crate::requirement::{caps_hold, check_feasible, is_feasible, min_buffer, Allocation, BStarReport};

/// Largest lot-vector count `brute_force` will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

const OVERSHOOT_NODE_LIMIT: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertStatus {
    Optimal,
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub status: CertStatus,
    /// J of the returned solution.
    pub incumbent_j: Option<f64>,
    pub solution: Option<Allocation>,
    pub solution_breakdown: Option<ObjectiveBreakdown>,
    /// J of the allocation handed in, if it was feasible.
    pub input_j: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub slacks: BTreeMap<String, f64>,
    pub binding: BTreeSet<String>,
    pub b_star: Option<BStarReport>,
    pub nodes_explored: u64,
    pub limit_reached: bool,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Lot box `lo ≤ x ≤ hi` with the parent's bound.
#[derive(Debug, Clone)]
struct Node {
    lo: Vec<u32>,
    hi: Vec<u32>,
    bound: f64,
}

struct Relaxation {
    bound: f64,
    x: Vec<f64>,
}

/// Continuous relaxation over a box. With U ≥ R_eff enforced the overshoot
/// is linear, so carry, movement and overshoot form a separable convex
/// objective under one covering row, solved exactly by filling the cheapest
/// segments per unit of value. CVaR is bounded below by its value at the
/// per-scenario minimal losses over the box (CVaR is monotone in losses).
fn relax(p: &Problem, lo: &[u32], hi: &[u32]) -> Option<Relaxation> {
    let n = p.len();
    let r = p.r_eff.units();
    let mut x = vec![0.0; n];
    let mut segs: Vec<(f64, usize, f64, f64)> = Vec::new(); // (cost per value, item, from, to)
    let mut u = 0.0;
    for i in 0..n {
        let v = p.values[i].units();
        let (l, h, hold) = (lo[i] as f64, hi[i] as f64, p.holdings[i] as f64);
        let lin = p.carry[i] + p.gamma * v;
        let (down, up) = (lin - p.lambda, lin + p.lambda);
        let xi = if down >= 0.0 {
            l
        } else if up <= 0.0 {
            h
        } else {
            hold.clamp(l, h)
        };
        x[i] = xi;
        u += v * xi;
        if v > 0.0 && xi < h {
            if xi < hold {
                segs.push((down / v, i, xi, hold.min(h)));
            }
            let from = xi.max(hold);
            if from < h {
                segs.push((up / v, i, from, h));
            }
        }
    }
    if u < r {
        segs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut deficit = r - u;
        for &(_, i, from, to) in &segs {
            if deficit <= 0.0 {
                break;
            }
            let v = p.values[i].units();
            let take = (deficit / v).min(to - from);
            x[i] = from + take;
            deficit -= take * v;
        }
        if deficit > 1e-9 * r.max(1.0) {
            return None;
        }
    }
    let mut bound = -p.gamma * r;
    for i in 0..n {
        let v = p.values[i].units();
        bound += (p.carry[i] + p.gamma * v) * x[i] + p.lambda * (x[i] - p.holdings[i] as f64).abs();
    }
    if p.mu != 0.0 {
        let mins: Vec<f64> = (0..p.num_scenarios())
            .map(|s| {
                p.loss_row(s)
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l * lo[i] as f64).min(l * hi[i] as f64))
                    .sum()
            })
            .collect();
        bound += p.mu * cvar_of_losses(&mins, &p.scenario_weights, p.alpha);
    }
    Some(Relaxation { bound, x })
}

/// Cheap necessary conditions for a box to contain a window-feasible point.
fn box_may_be_feasible(p: &Problem, lo: &[u32], hi: &[u32]) -> bool {
    let (u_lo, u_hi) = (p.coverage(lo), p.coverage(hi));
    if u_hi < p.r_eff || p.window_top().is_some_and(|top| u_lo > top) {
        return false;
    }
    for cap in &p.caps {
        match cap.limit {
            CapLimit::Absolute(m) => {
                if p.group_value(cap, lo) > m {
                    return false;
                }
            }
            CapLimit::FractionOfU(_) => {
                let (mut min, mut scale) = (0.0, 0.0);
                for i in 0..p.len() {
                    let a = cap.coefficient(i, p.values[i]);
                    min += (a * lo[i] as f64).min(a * hi[i] as f64);
                    scale += a.abs() * hi[i] as f64;
                }
                if min > 1e-9 * (1.0 + scale) {
                    return false;
                }
            }
        }
    }
    true
}

fn window_feasible(p: &Problem, lots: &[u32]) -> bool {
    let u = p.coverage(lots);
    u >= p.r_eff && p.window_top().map_or(true, |top| u <= top) && caps_hold(p, lots, u)
}

/// Branch-and-bound certification of `incumbent`.
pub fn certify(p: &Problem, incumbent: &Allocation, limits: &SolverLimits) -> Result<CertificationReport> {
    let start = Instant::now();
    if incumbent.len() != p.len() || !incumbent.within_bounds(p) {
        return Err(Error::InvalidAllocation(
            "incumbent violates lot bounds or inventory dimension".into(),
        ));
    }
    let input_j = is_feasible(p, &incumbent.lots).then(|| j_value(p, &incumbent.lots));
    let mut best: Option<(Vec<u32>, f64)> = input_j.map(|j| (incumbent.lots.clone(), j));
    let offer = |best: &mut Option<(Vec<u32>, f64)>, x: &[u32], j: f64| {
        if best.as_ref().map_or(true, |(_, b)| j < *b) {
            *best = Some((x.to_vec(), j));
        }
    };
    // The MTA gate can admit the holdings outside the window.
    if is_feasible(p, &p.holdings) {
        offer(&mut best, &p.holdings, j_value(p, &p.holdings));
    }

    let tol = |b: f64| 1e-11 * b.abs().max(1.0);
    let mut stack = vec![Node { lo: vec![0; p.len()], hi: p.upper.clone(), bound: f64::NEG_INFINITY }];
    let mut nodes = 0u64;
    let mut limit_reached = false;
    while let Some(node) = stack.pop() {
        if limits.wall_seconds <= 0.0
            || (nodes % 256 == 0 && start.elapsed().as_secs_f64() >= limits.wall_seconds)
        {
            stack.push(node);
            limit_reached = true;
            break;
        }
        nodes += 1;
        if best.as_ref().is_some_and(|(_, b)| node.bound >= b - tol(*b)) {
            continue;
        }
        if !box_may_be_feasible(p, &node.lo, &node.hi) {
            continue;
        }
        let Some(rel) = relax(p, &node.lo, &node.hi) else { continue };
        if best.as_ref().is_some_and(|(_, b)| rel.bound >= b - tol(*b)) {
            continue;
        }
        let frac = (0..p.len()).find(|&i| (rel.x[i] - rel.x[i].round()).abs() > 1e-9);
        let (k, split) = match frac {
            Some(k) => (k, rel.x[k].floor() as u32),
            None => {
                let y: Vec<u32> = rel.x.iter().map(|v| v.round() as u32).collect();
                if window_feasible(p, &y) {
                    let j = j_value(p, &y);
                    offer(&mut best, &y, j);
                    if j <= rel.bound + tol(j) {
                        continue;
                    }
                }
                let Some(k) = (0..p.len())
                    .filter(|&i| node.hi[i] > node.lo[i])
                    .max_by(|&a, &b| (node.hi[a] - node.lo[a]).cmp(&(node.hi[b] - node.lo[b])).then(b.cmp(&a)))
                else {
                    continue;
                };
                (k, node.lo[k] + (node.hi[k] - node.lo[k] - 1) / 2)
            }
        };
        let mut left = node.clone();
        left.hi[k] = split;
        left.bound = rel.bound;
        let mut right = node;
        right.lo[k] = split + 1;
        right.bound = rel.bound;
        stack.push(right);
        stack.push(left);
    }

    let wall_time = start.elapsed().as_secs_f64();
    let open_bound = stack
        .iter()
        .map(|n| {
            if n.bound.is_finite() {
                n.bound
            } else {
                relax(p, &n.lo, &n.hi).map_or(f64::INFINITY, |r| r.bound)
            }
        })
        .fold(f64::INFINITY, f64::min);
    let mut report = CertificationReport {
        status: CertStatus::Infeasible,
        incumbent_j: None,
        solution: None,
        solution_breakdown: None,
        input_j,
        best_bound: None,
        gap: None,
        slacks: BTreeMap::new(),
        binding: BTreeSet::new(),
        b_star: None,
        nodes_explored: nodes,
        limit_reached,
        wall_time,
    };
    match best {
        Some((x, j)) => {
            let bound = if limit_reached { open_bound.min(j) } else { j };
            let x = Allocation::new(x);
            let fr = check_feasible(&x, p);
            report.status = if limit_reached && bound < j { CertStatus::Feasible } else { CertStatus::Optimal };
            report.gap = Some(if report.status == CertStatus::Optimal { 0.0 } else { (j - bound) / j.abs().max(1.0) });
            report.best_bound = Some(if report.status == CertStatus::Optimal { j } else { bound });
            report.incumbent_j = Some(j);
            report.solution_breakdown = Some(breakdown(&x, p));
            report.slacks = fr.slacks;
            report.binding = fr.binding;
            report.solution = Some(x);
        }
        None => {
            if p.hard_cap {
                report.b_star = min_buffer(p, limits.exact_bstar).ok();
            }
        }
    }
    Ok(report)
}

/// U-cap pre-check: the minimal feasible buffer with the exact search on.
pub fn ucap_precheck(p: &Problem) -> Result<BStarReport> {
    min_buffer(p, true)
}

/// Number of lot vectors in the full box.
pub fn search_space_size(p: &Problem) -> f64 {
    p.upper.iter().map(|&m| m as f64 + 1.0).product()
}

/// Exhaustive oracle: the feasible J-minimizer, lexicographically smallest
/// among ties, or `None` when no lot vector is feasible.
pub fn brute_force(p: &Problem) -> Result<Option<(Allocation, f64)>> {
    let size = search_space_size(p);
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::SearchSpaceTooLarge { size, limit: BRUTE_FORCE_LIMIT });
    }
    let n = p.len();
    let mut x = vec![0u32; n];
    let mut u = 0i64;
    let r = p.r_eff.cents();
    let top = p.window_top().map(|t| t.cents());
    let mut best: Option<(Vec<u32>, f64)> = None;
    loop {
        let in_window = u >= r && top.map_or(true, |t| u <= t);
        let candidate = if in_window {
            caps_hold(p, &x, Money(u))
        } else {
            x == p.holdings && is_feasible(p, &x)
        };
        if candidate {
            let j = j_value(p, &x);
            if best.as_ref().map_or(true, |(_, b)| j < *b) {
                best = Some((x.clone(), j));
            }
        }
        // Odometer, last coordinate fastest, so visits are in lexicographic order.
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(best.map(|(x, j)| (Allocation::new(x), j)));
            }
            k -= 1;
            if x[k] < p.upper[k] {
                x[k] += 1;
                u += p.values[k].cents();
                break;
            }
            u -= x[k] as i64 * p.values[k].cents();
            x[k] = 0;
        }
    }
}

/// Minimal overshoot `U − R_eff` over all covers (lot bounds, U ≥ R_eff and
/// every cap), ignoring any coverage cap. Depth-first over items in
/// descending lot value.
pub fn min_overshoot_exact(p: &Problem) -> Result<Option<(Money, Allocation)>> {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| p.upper[i] > 0).collect();
    order.sort_by(|&a, &b| p.values[b].cmp(&p.values[a]).then(a.cmp(&b)));
    // rest_max[d]: coverage still available from order[d..].
    let mut rest_max = vec![0i64; order.len() + 1];
    for d in (0..order.len()).rev() {
        let i = order[d];
        rest_max[d] = rest_max[d + 1] + p.upper[i] as i64 * p.values[i].cents();
    }
    let frac_caps: Vec<(Vec<f64>, Vec<f64>)> = p
        .caps
        .iter()
        .filter(|c| matches!(c.limit, CapLimit::FractionOfU(_)))
        .map(|c| {
            let a: Vec<f64> = (0..n).map(|i| c.coefficient(i, p.values[i])).collect();
            let mut rest = vec![0.0; order.len() + 1];
            for d in (0..order.len()).rev() {
                let i = order[d];
                rest[d] = rest[d + 1] + (a[i] * p.upper[i] as f64).min(0.0);
            }
            (a, rest)
        })
        .collect();

    struct Search<'a> {
        p: &'a Problem,
        order: Vec<usize>,
        rest_max: Vec<i64>,
        frac_caps: Vec<(Vec<f64>, Vec<f64>)>,
        x: Vec<u32>,
        best: Option<(i64, Vec<u32>)>,
        nodes: u64,
    }

    impl Search<'_> {
        fn visit(&mut self, d: usize, u: i64) -> Result<()> {
            self.nodes += 1;
            if self.nodes > OVERSHOOT_NODE_LIMIT {
                return Err(Error::SearchSpaceTooLarge {
                    size: search_space_size(self.p),
                    limit: OVERSHOOT_NODE_LIMIT as f64,
                });
            }
            let p = self.p;
            let r = p.r_eff.cents();
            if self.best.as_ref().is_some_and(|(b, _)| u - r >= *b) {
                return Ok(());
            }
            if u + self.rest_max[d] < r {
                return Ok(());
            }
            for cap in &p.caps {
                if let CapLimit::Absolute(m) = cap.limit {
                    if p.group_value(cap, &self.x) > m {
                        return Ok(());
                    }
                }
            }
            for (a, rest) in &self.frac_caps {
                let now: f64 = (0..p.len()).map(|i| a[i] * self.x[i] as f64).sum();
                let scale: f64 = a.iter().map(|v| v.abs()).sum::<f64>() * 10.0;
                if now + rest[d] > 1e-9 * (1.0 + scale) {
                    return Ok(());
                }
            }
            if u >= r && caps_hold(p, &self.x, Money(u)) {
                self.best = Some((u - r, self.x.clone()));
                return Ok(());
            }
            if d == self.order.len() {
                return Ok(());
            }
            let i = self.order[d];
            let v = p.values[i].cents();
            self.visit(d + 1, u)?;
            for k in 1..=p.upper[i] {
                self.x[i] = k;
                self.visit(d + 1, u + k as i64 * v)?;
            }
            self.x[i] = 0;
            Ok(())
        }
    }

    let mut s = Search { p, order, rest_max, frac_caps, x: vec![0; n], best: None, nodes: 0 };
    s.visit(0, 0)?;
    Ok(s.best.map(|(o, x)| (Money(o), Allocation::new(x))))
}
