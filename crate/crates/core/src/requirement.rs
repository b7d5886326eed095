//! Effective requirement, coverage feasibility and the minimal feasible buffer.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::baselines::bl1_density_greedy;
use crate::certifier::min_overshoot_exact;
use crate::data_model::CsaTerms;
use crate::error::{Error, Result};
use crate::explorer::repair;
use crate::money::Money;
use crate::problem::Problem;

/// `R_eff = ⌈max(E − T − IA − IM, 0) / RA⌉ · RA`, exact in cents.
pub fn effective_requirement(exposure: Money, terms: &CsaTerms) -> Money {
    let net = (exposure - terms.threshold - terms.independent_amount - terms.initial_margin)
        .positive_part()
        .cents();
    let ra = terms.rounding.cents();
    debug_assert!(ra > 0);
    Money(((net + ra - 1) / ra) * ra)
}

/// Integer lot vector aligned to the inventory.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Allocation {
    pub lots: Vec<u32>,
}

impl Allocation {
    pub fn new(lots: Vec<u32>) -> Allocation {
        Allocation { lots }
    }

    pub fn zeros(n: usize) -> Allocation {
        Allocation { lots: vec![0; n] }
    }

    pub fn holdings(p: &Problem) -> Allocation {
        Allocation::new(p.holdings.clone())
    }

    pub fn coverage(&self, p: &Problem) -> Money {
        p.coverage(&self.lots)
    }

    pub fn len(&self) -> usize {
        self.lots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lots.is_empty()
    }

    pub fn within_bounds(&self, p: &Problem) -> bool {
        self.lots.len() == p.len() && self.lots.iter().zip(&p.upper).all(|(x, m)| x <= m)
    }
}

impl From<Vec<u32>> for Allocation {
    fn from(lots: Vec<u32>) -> Self {
        Allocation::new(lots)
    }
}

/// One evaluated constraint; money constraints are in currency units, lot
/// bounds in lots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintRow {
    pub id: String,
    pub lhs: f64,
    pub bound: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<ConstraintRow>,
    pub binding: BTreeSet<String>,
    /// Slack of every coverage, window and cap constraint.
    pub slacks: BTreeMap<String, f64>,
    /// Set when the holdings were admitted through the MTA gate.
    pub mta_no_transfer: bool,
    /// Coverage/window violations waived by the MTA gate.
    pub waived: Vec<ConstraintRow>,
}

impl FeasibilityReport {
    /// Total violation magnitude (lots and money mixed; used only for ordering).
    pub fn violation_total(&self) -> f64 {
        self.violations.iter().map(|v| -v.slack).sum()
    }

    pub fn most_violated(&self) -> Option<&ConstraintRow> {
        self.violations
            .iter()
            .min_by(|a, b| a.slack.total_cmp(&b.slack))
    }
}

/// Evaluates, in order: lot bounds, coverage, window, caps, then the MTA gate.
pub fn check_feasible(x: &Allocation, p: &Problem) -> FeasibilityReport {
    assert_eq!(x.len(), p.len(), "allocation dimension must match the inventory");
    let mut violations = Vec::new();
    let mut binding = BTreeSet::new();
    let mut slacks = BTreeMap::new();

    for (i, (&xi, &mi)) in x.lots.iter().zip(&p.upper).enumerate() {
        if xi > mi {
            violations.push(ConstraintRow {
                id: format!("lot_bound:{}", p.item_id(i)),
                lhs: xi as f64,
                bound: mi as f64,
                slack: mi as f64 - xi as f64,
            });
        }
    }
    let bounds_ok = violations.is_empty();

    let u = x.coverage(p);
    let mut window_rows = Vec::new();
    let cov = ConstraintRow {
        id: "coverage".into(),
        lhs: u.units(),
        bound: p.r_eff.units(),
        slack: (u - p.r_eff).units(),
    };
    slacks.insert(cov.id.clone(), cov.slack);
    if u == p.r_eff {
        binding.insert(cov.id.clone());
    }
    if u < p.r_eff {
        window_rows.push(cov);
    }
    if let Some(top) = p.window_top() {
        let row = ConstraintRow {
            id: "window".into(),
            lhs: u.units(),
            bound: top.units(),
            slack: (top - u).units(),
        };
        slacks.insert(row.id.clone(), row.slack);
        if u == top {
            binding.insert(row.id.clone());
        }
        if u > top {
            window_rows.push(row);
        }
    }

    let mut caps_ok = true;
    for cap in &p.caps {
        let lhs = p.group_value(cap, &x.lots);
        let slack = cap.slack_units(lhs, u);
        slacks.insert(cap.id.clone(), slack);
        if !cap.admits(lhs, u) {
            caps_ok = false;
            violations.push(ConstraintRow {
                id: cap.id.clone(),
                lhs: lhs.units(),
                bound: cap.slack_units(Money::ZERO, u),
                slack,
            });
        } else if !cap.admits(lhs + Money(1), u) {
            binding.insert(cap.id.clone());
        }
    }

    let mut mta_no_transfer = false;
    let mut waived = Vec::new();
    if !window_rows.is_empty()
        && bounds_ok
        && caps_ok
        && x.lots == p.holdings
        && distance_to_window(p, u) < p.mta
    {
        mta_no_transfer = true;
        waived = window_rows;
    } else {
        // Keep the documented evaluation order: bounds, coverage/window, caps.
        let n_bounds = violations.iter().filter(|v| v.id.starts_with("lot_bound:")).count();
        for (k, row) in window_rows.into_iter().enumerate() {
            violations.insert(n_bounds + k, row);
        }
    }

    FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
        binding,
        slacks,
        mta_no_transfer,
        waived,
    }
}

/// How far coverage `u` lies outside `[R_eff, R_eff + B]`.
fn distance_to_window(p: &Problem, u: Money) -> Money {
    if u < p.r_eff {
        p.r_eff - u
    } else {
        match p.window_top() {
            Some(top) if u > top => u - top,
            _ => Money::ZERO,
        }
    }
}

pub(crate) fn caps_hold(p: &Problem, lots: &[u32], u: Money) -> bool {
    p.caps
        .iter()
        .all(|c| c.admits(p.group_value(c, lots), u))
}

/// Caps for one more lot of `i` on top of `lots` (coverage `u`). With
/// `toward`, fraction caps are judged at max(U, R_eff), the coverage a
/// partial fill is heading for. Ignores the U-cap.
pub(crate) fn lot_fits_caps(p: &Problem, lots: &mut [u32], i: usize, u: Money, toward: bool) -> bool {
    if lots[i] >= p.upper[i] {
        return false;
    }
    let next = u + p.values[i];
    lots[i] += 1;
    let ok = caps_hold(p, lots, if toward { next.max(p.r_eff) } else { next });
    lots[i] -= 1;
    ok
}

/// Fill mode for greedy additions: strict unless no item fits strictly.
pub(crate) fn fill_toward(p: &Problem, lots: &mut [u32], u: Money) -> bool {
    !(0..p.len()).any(|i| lot_fits_caps(p, lots, i, u, false))
}

fn bounds_hold(p: &Problem, lots: &[u32]) -> bool {
    lots.iter().zip(&p.upper).all(|(x, m)| x <= m)
}

/// Lot bounds, coverage and caps; ignores the coverage cap and the MTA gate.
pub(crate) fn is_cover(p: &Problem, lots: &[u32]) -> bool {
    let u = p.coverage(lots);
    u >= p.r_eff && bounds_hold(p, lots) && caps_hold(p, lots, u)
}

/// Allocation-free equivalent of `check_feasible(..).feasible`.
pub fn is_feasible(p: &Problem, lots: &[u32]) -> bool {
    let u = p.coverage(lots);
    if !bounds_hold(p, lots) || !caps_hold(p, lots, u) {
        return false;
    }
    let in_window = u >= p.r_eff && p.window_top().map_or(true, |top| u <= top);
    in_window || (lots == p.holdings.as_slice() && distance_to_window(p, u) < p.mta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BStarReport {
    pub b_star_greedy: Money,
    pub b_star_exact: Option<Money>,
    /// Reported B* (exact when available) in basis points of R_eff.
    pub b_star_bps: f64,
    pub infeasible_u_cap: bool,
    pub user_buffer: Money,
    pub greedy_cover: Vec<u32>,
}

impl BStarReport {
    pub fn reported(&self) -> Money {
        self.b_star_exact.unwrap_or(self.b_star_greedy)
    }
}

/// Minimal feasible buffer: greedy two-phase upper bound and, when `exact`,
/// the exact minimal overshoot over all covers.
pub fn min_buffer(p: &Problem, exact: bool) -> Result<BStarReport> {
    let mut open = p.clone();
    open.hard_cap = false;
    let exact_cover = if exact {
        match min_overshoot_exact(&open) {
            Ok(found) => Some(found),
            Err(Error::SearchSpaceTooLarge { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let exact_b = exact_cover.as_ref().and_then(|f| f.as_ref().map(|(o, _)| *o));

    let mut cover = bl1_density_greedy(&open);
    if !is_cover(&open, &cover.lots) {
        cover = repair(&cover, &open).allocation;
    }
    if !is_cover(&open, &cover.lots) {
        match &exact_cover {
            Some(Some((_, x))) => cover = x.clone(),
            _ => {
                let report = check_feasible(&cover, &open);
                let (constraint, slack) = report
                    .most_violated()
                    .map(|r| (r.id.clone(), r.slack))
                    .unwrap_or_else(|| ("coverage".into(), 0.0));
                return Err(Error::InfeasibleBase { constraint, slack });
            }
        }
    }

    // Phase 2: drop single lots while a cover remains, biggest U reduction first.
    loop {
        let mut best: Option<usize> = None;
        for i in 0..p.len() {
            if cover.lots[i] == 0 {
                continue;
            }
            cover.lots[i] -= 1;
            let ok = is_cover(&open, &cover.lots);
            cover.lots[i] += 1;
            if !ok {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let key = |k: usize| (std::cmp::Reverse(p.values[k]), p.carry[k], p.item_id(k));
                    key(i).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less)
                }
            };
            if better {
                best = Some(i);
            }
        }
        match best {
            Some(i) => cover.lots[i] -= 1,
            None => break,
        }
    }
    let greedy = cover.coverage(p) - p.r_eff;
    let reported = exact_b.unwrap_or(greedy);
    Ok(BStarReport {
        b_star_greedy: greedy,
        b_star_exact: exact_b,
        b_star_bps: reported.cents() as f64 * 10_000.0 / p.r_eff.cents().max(1) as f64,
        infeasible_u_cap: p.hard_cap && p.buffer < reported,
        user_buffer: p.buffer,
        greedy_cover: cover.lots,
    })
}
