//! Higher-order pseudo-Boolean sub-models over a subset of items, in the
//! spin form consumed by the simulator.
//!
//! Each item carries a signed lot delta δ_i ∈ [−r, r] in linear binary
//! weights `1, 2, …, −r` (all bits zero ⇔ δ = 0). The model is
//!
//! ```text
//! Σ_i F_i(δ_i)                               carry + movement + γ, μ marginals
//! + A_w ((Σ v_i δ_i − g) / v_s)²              window
//! + A_c ((Σ a_ci δ_i − s_c) / v_s)²           each near-binding cap c
//! + A_t · consistency(t_i, bits_i)            touch ancillas (k_max ≥ 3)
//! + A_x ((Σ v_i δ_i − g) / v_s) · Σ t_i
//! + A_4 ((Σ v_i δ_i − g) / v_s)² · t_i        (k_max = 4)
//! ```
//!
//! with terms above `k_max` Rosenberg-quadratized.

mod poly;

use std::collections::BTreeMap;

use serde::Serialize;

pub use poly::{PseudoBoolean, Substitution};

use crate::data_model::SolverLimits;
use crate::error::{Error, Result};
use crate::explorer::repair;
use crate::objective::{j_value, scenario_losses};
use crate::problem::Problem;
use crate::requirement::{is_feasible, Allocation};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    LotBit,
    TouchAncilla,
    QuadAncilla,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub kind: VarKind,
    pub item: Option<String>,
    pub bit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemEncoding {
    pub index: usize,
    pub id: String,
    pub x_inc: u32,
    pub upper: u32,
    pub vars: Vec<usize>,
    pub weights: Vec<i64>,
    pub touch: Option<usize>,
}

impl ItemEncoding {
    pub fn delta(&self, bits: &[bool]) -> i64 {
        self.vars
            .iter()
            .zip(&self.weights)
            .filter(|(&v, _)| bits[v])
            .map(|(_, &w)| w)
            .sum()
    }

    pub fn lots(&self, bits: &[bool]) -> u32 {
        (self.x_inc as i64 + self.delta(bits)).clamp(0, self.upper as i64) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyWeights {
    pub window: f64,
    pub cap: f64,
    pub cross: f64,
    pub order4: f64,
    pub touch: f64,
    /// Window target change g in currency units.
    pub window_target: f64,
    pub value_scale: f64,
    pub caps_penalized: Vec<String>,
    pub quadratization: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hubo<S: Scalar> {
    pub variables: Vec<Variable>,
    /// Spin terms: sorted variable sets → coefficient.
    pub terms: BTreeMap<Vec<usize>, S>,
    pub constant: S,
    pub width: usize,
    pub max_order: usize,
    pub k_max: usize,
    pub penalty_weights: PenaltyWeights,
    pub items: Vec<ItemEncoding>,
    /// The same model over bits.
    pub binary: PseudoBoolean,
}

/// Signed lot-delta weights for trust radius `r`: a bounded binary code of
/// `[0, r]` followed by one `−r` bit.
pub fn delta_weights(r: u32) -> Vec<i64> {
    if r == 0 {
        return Vec::new();
    }
    let r = r as i64;
    let k = 64 - (r as u64).leading_zeros() as i64; // ⌈log2(r + 1)⌉
    let mut w: Vec<i64> = (0..k - 1).map(|j| 1i64 << j).collect();
    w.push(r - ((1i64 << (k - 1)) - 1));
    w.push(-r);
    w
}

impl<S: Scalar> Hubo<S> {
    /// Wraps a binary polynomial; every variable is a lot bit of no item.
    pub fn from_binary(binary: PseudoBoolean, width: usize, k_max: usize) -> Hubo<S> {
        let variables = (0..width)
            .map(|b| Variable { kind: VarKind::LotBit, item: None, bit: b })
            .collect();
        Hubo::assemble(binary, variables, k_max, PenaltyWeights::none(), Vec::new())
    }

    /// Direct spin-form model.
    pub fn from_spin_terms(width: usize, terms: BTreeMap<Vec<usize>, S>, constant: S) -> Hubo<S> {
        let max_order = terms.keys().map(Vec::len).max().unwrap_or(0);
        Hubo {
            variables: (0..width)
                .map(|b| Variable { kind: VarKind::LotBit, item: None, bit: b })
                .collect(),
            terms,
            constant,
            width,
            max_order,
            k_max: max_order.max(2),
            penalty_weights: PenaltyWeights::none(),
            items: Vec::new(),
            binary: PseudoBoolean::new(),
        }
    }

    fn assemble(
        binary: PseudoBoolean,
        variables: Vec<Variable>,
        k_max: usize,
        penalty_weights: PenaltyWeights,
        items: Vec<ItemEncoding>,
    ) -> Hubo<S> {
        let (spin, c0) = binary.to_spin();
        Hubo {
            width: variables.len(),
            max_order: spin.keys().map(Vec::len).max().unwrap_or(0),
            terms: spin.into_iter().map(|(k, c)| (k, S::of(c))).collect(),
            constant: S::of(c0),
            variables,
            k_max,
            penalty_weights,
            items,
            binary,
        }
    }

    pub fn cast<T: Scalar>(&self) -> Hubo<T> {
        Hubo {
            variables: self.variables.clone(),
            terms: self.terms.iter().map(|(k, c)| (k.clone(), T::of(c.as_f64()))).collect(),
            constant: T::of(self.constant.as_f64()),
            width: self.width,
            max_order: self.max_order,
            k_max: self.k_max,
            penalty_weights: self.penalty_weights.clone(),
            items: self.items.clone(),
            binary: self.binary.clone(),
        }
    }

    /// Number of spin terms per order.
    pub fn term_counts(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for k in self.terms.keys() {
            *out.entry(k.len()).or_insert(0) += 1;
        }
        out
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    pub fn subset_ids(&self) -> Vec<String> {
        self.items.iter().map(|e| e.id.clone()).collect()
    }

    /// Terms as (bit mask, coefficient) for fast evaluation by basis index.
    pub fn masks(&self) -> Vec<(u64, S)> {
        self.terms
            .iter()
            .map(|(k, &c)| (k.iter().fold(0u64, |m, &j| m | 1 << j), c))
            .collect()
    }
}

impl PenaltyWeights {
    fn none() -> PenaltyWeights {
        PenaltyWeights {
            window: 0.0,
            cap: 0.0,
            cross: 0.0,
            order4: 0.0,
            touch: 0.0,
            window_target: 0.0,
            value_scale: 1.0,
            caps_penalized: Vec::new(),
            quadratization: Vec::new(),
        }
    }
}

/// Bits of basis index `idx` (bit `j` ↔ variable `j`).
pub fn bits_of(idx: usize, width: usize) -> Vec<bool> {
    (0..width).map(|j| idx >> j & 1 == 1).collect()
}

/// `constant + Σ c_T Π_{j∈T} z_j` with `z_j = 1 − 2 b_j`.
pub fn evaluate_hubo<S: Scalar>(h: &Hubo<S>, bits: &[bool]) -> S {
    assert_eq!(bits.len(), h.width, "bitstring width must match the model");
    let mut e = h.constant;
    for (k, &c) in &h.terms {
        let odd = k.iter().filter(|&&j| bits[j]).count() % 2 == 1;
        e = if odd { e - c } else { e + c };
    }
    e
}

pub fn ancilla_width<S: Scalar>(h: &Hubo<S>) -> usize {
    h.width
}

/// Applies the decoded deltas to `x_inc` (clamped to lot bounds); ancilla
/// bits are ignored and items outside the subset are unchanged.
pub fn map_lots<S: Scalar>(bits: &[bool], h: &Hubo<S>, x_inc: &Allocation) -> Allocation {
    assert_eq!(bits.len(), h.width, "bitstring width must match the model");
    let mut x = x_inc.clone();
    for e in &h.items {
        x.lots[e.index] = (x_inc.lots[e.index] as i64 + e.delta(bits)).clamp(0, e.upper as i64) as u32;
    }
    x
}

/// Bits that encode the requested per-item deltas, if representable.
pub fn encode_deltas<S: Scalar>(h: &Hubo<S>, deltas: &[i64]) -> Option<Vec<bool>> {
    let mut bits = vec![false; h.width];
    for (e, &d) in h.items.iter().zip(deltas) {
        let nb = e.vars.len();
        let pattern = (0..1usize << nb).find(|&m| {
            (0..nb).filter(|&k| m >> k & 1 == 1).map(|k| e.weights[k]).sum::<i64>() == d
        })?;
        for k in 0..nb {
            bits[e.vars[k]] = pattern >> k & 1 == 1;
        }
        if let Some(t) = e.touch {
            bits[t] = pattern != 0;
        }
    }
    Some(bits)
}

/// CVaR subgradient Σ_s q_s L[s, ·] at `lots`, where q is the optimal tail
/// distribution (mass 1 − α on the largest losses, scaled by 1/(1 − α)).
fn cvar_subgradient(p: &Problem, lots: &[u32]) -> Vec<f64> {
    let n = p.len();
    let s = p.num_scenarios();
    if s == 0 {
        return vec![0.0; n];
    }
    let losses = scenario_losses(p, lots);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    let tail = 1.0 - p.alpha;
    let mut left = tail;
    let mut g = vec![0.0; n];
    for sc in order {
        if left <= 0.0 {
            break;
        }
        let q = p.scenario_weights[sc].min(left);
        left -= q;
        for (gi, l) in g.iter_mut().zip(p.loss_row(sc)) {
            *gi += q / tail * l;
        }
    }
    g
}

/// Builds the sub-model over `subset` around `x_inc`.
pub fn build_hubo(
    p: &Problem,
    x_inc: &Allocation,
    subset: &[usize],
    limits: &SolverLimits,
) -> Result<Hubo<f64>> {
    let r = limits.trust_radius;
    let k_max = limits.k_max;
    let weights = delta_weights(r);
    let mut variables = Vec::new();
    let mut items = Vec::new();
    for &i in subset {
        let x = x_inc.lots[i];
        let m = p.upper[i];
        let movable = r > 0 && m > 0 && (x > 0 || x < m);
        if !movable {
            continue;
        }
        let vars: Vec<usize> = (0..weights.len()).map(|b| variables.len() + b).collect();
        for b in 0..weights.len() {
            variables.push(Variable { kind: VarKind::LotBit, item: Some(p.item_id(i).to_string()), bit: b });
        }
        items.push(ItemEncoding {
            index: i,
            id: p.item_id(i).to_string(),
            x_inc: x,
            upper: m,
            vars,
            weights: weights.clone(),
            touch: None,
        });
    }
    if items.is_empty() {
        return Err(Error::EmptyModel(
            "no subset item can move within the trust radius".into(),
        ));
    }
    if k_max >= 3 {
        for e in items.iter_mut() {
            e.touch = Some(variables.len());
            variables.push(Variable { kind: VarKind::TouchAncilla, item: Some(e.id.clone()), bit: 0 });
        }
    }

    let cost_scale = {
        let c = items.iter().map(|e| p.carry[e.index].abs()).fold(0.0, f64::max);
        if c > 0.0 { c } else { 1.0 }
    };
    let a_w = 10.0 * cost_scale * r as f64;
    let (a_c, a_x, a_4, a_t) = (a_w, a_w / 10.0, a_w / 20.0, a_w);
    let v_s = items.iter().map(|e| p.values[e.index].units()).fold(0.0, f64::max);

    let mut poly = PseudoBoolean::new();
    let grad = cvar_subgradient(p, &x_inc.lots);

    // Per-item objective change.
    for e in &items {
        let i = e.index;
        let (x, h, m) = (e.x_inc as i64, p.holdings[i] as i64, e.upper as i64);
        let slope = p.carry[i] + p.gamma * p.values[i].units() + p.mu * grad[i];
        if k_max >= 3 {
            let nb = e.vars.len();
            let table: Vec<f64> = (0..1usize << nb)
                .map(|mask| {
                    let d: i64 = (0..nb).filter(|&k| mask >> k & 1 == 1).map(|k| e.weights[k]).sum();
                    let dc = (x + d).clamp(0, m) - x;
                    slope * dc as f64 + p.lambda * ((x + dc - h).abs() - (x - h).abs()) as f64
                })
                .collect();
            poly.add_table(&e.vars, &table);
        } else {
            let mv = p.lambda * (x - h).signum() as f64;
            for (&v, &w) in e.vars.iter().zip(&e.weights) {
                poly.add(&[v], (slope + mv) * w as f64);
            }
        }
    }

    // Window residual (Σ v δ − g) / v_s.
    let u = p.coverage(&x_inc.lots);
    let g = (p.r_eff - u).units() + p.buffer.units() / 2.0;
    let coverage_terms: Vec<(usize, f64)> = items
        .iter()
        .flat_map(|e| {
            let v = p.values[e.index].units();
            e.vars.iter().zip(&e.weights).map(move |(&j, &w)| (j, v * w as f64 / v_s))
        })
        .collect();
    let residual = PseudoBoolean::linear(&coverage_terms, -g / v_s);
    poly.add_product(&residual, &residual, a_w);

    // Near-binding caps.
    let mut caps_penalized = Vec::new();
    for cap in &p.caps {
        let coef: Vec<f64> = items.iter().map(|e| cap.coefficient(e.index, p.values[e.index])).collect();
        let amax = coef.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if amax == 0.0 {
            continue;
        }
        let slack = cap.slack_units(p.group_value(cap, &x_inc.lots), u);
        if slack >= amax {
            continue;
        }
        let lin: Vec<(usize, f64)> = items
            .iter()
            .zip(&coef)
            .flat_map(|(e, &a)| e.vars.iter().zip(&e.weights).map(move |(&j, &w)| (j, a * w as f64 / v_s)))
            .collect();
        let res = PseudoBoolean::linear(&lin, -slack / v_s);
        poly.add_product(&res, &res, a_c);
        caps_penalized.push(cap.id.clone());
    }

    // Touch ancillas.
    if k_max >= 3 {
        let mut touches = PseudoBoolean::new();
        for e in &items {
            let t = e.touch.expect("touch ancilla");
            touches.add(&[t], 1.0);
            for &b in &e.vars {
                poly.add(&[b], a_t);
                poly.add(&[b, t], -a_t);
            }
            if k_max == 3 {
                // t·(1 − Σb + Σ_{pairs} b b): zero whenever one or two bits are set.
                poly.add(&[t], a_t);
                for (k, &b) in e.vars.iter().enumerate() {
                    poly.add(&[t, b], -a_t);
                    for &c in &e.vars[k + 1..] {
                        poly.add(&[t, b, c], a_t);
                    }
                }
            } else {
                // t·Π(1 − b), expanded.
                let nb = e.vars.len();
                for mask in 0..1usize << nb {
                    let mut set: Vec<usize> = (0..nb).filter(|&k| mask >> k & 1 == 1).map(|k| e.vars[k]).collect();
                    let sign = if set.len() % 2 == 0 { 1.0 } else { -1.0 };
                    set.push(t);
                    poly.add(&set, sign * a_t);
                }
                let mut ti = PseudoBoolean::new();
                ti.add(&[t], 1.0);
                let mut sq = PseudoBoolean::new();
                sq.add_product(&residual, &residual, 1.0);
                poly.add_product(&sq, &ti, a_4);
            }
        }
        poly.add_product(&residual, &touches, a_x);
    }

    let mut next = variables.len();
    let subs = poly.quadratize(k_max, &mut next);
    for s in &subs {
        variables.push(Variable { kind: VarKind::QuadAncilla, item: None, bit: s.ancilla });
    }
    let pw = PenaltyWeights {
        window: a_w,
        cap: a_c,
        cross: if k_max >= 3 { a_x } else { 0.0 },
        order4: if k_max >= 4 { a_4 } else { 0.0 },
        touch: if k_max >= 3 { a_t } else { 0.0 },
        window_target: g,
        value_scale: v_s,
        caps_penalized,
        quadratization: subs.iter().map(|s| s.penalty).collect(),
    };
    Ok(Hubo::assemble(poly, variables, k_max, pw, items))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityFlag {
    /// The ground state decodes to an infeasible allocation.
    PenaltyTooWeak,
    /// Feasible after decoding, but the penalty shaping outweighed the
    /// objective and J got worse.
    ShapingDominates,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fidelity {
    pub ground_index: usize,
    pub ground_energy: f64,
    pub decoded: Allocation,
    pub decoded_feasible: bool,
    pub repaired: Allocation,
    pub j_repaired: f64,
    pub j_inc: f64,
    pub flag: Option<FidelityFlag>,
}

/// Enumerates every bitstring (width ≤ 20), decodes and repairs the lowest
/// energy one (lowest index on ties), and flags weak penalties.
pub fn ground_state_check(h: &Hubo<f64>, p: &Problem, x_inc: &Allocation) -> Result<Fidelity> {
    if h.width > 20 {
        return Err(Error::WidthTooLarge { width: h.width, limit: 20 });
    }
    let masks = h.masks();
    let (mut best, mut best_e) = (0usize, f64::INFINITY);
    for idx in 0..1usize << h.width {
        let e = masks.iter().fold(h.constant, |acc, &(m, c)| {
            if (idx as u64 & m).count_ones() % 2 == 1 { acc - c } else { acc + c }
        });
        if e < best_e {
            best_e = e;
            best = idx;
        }
    }
    let bits = bits_of(best, h.width);
    let decoded = map_lots(&bits, h, x_inc);
    let decoded_feasible = is_feasible(p, &decoded.lots);
    let repaired = repair(&decoded, p).allocation;
    let j_repaired = j_value(p, &repaired.lots);
    let j_inc = j_value(p, &x_inc.lots);
    let flag = if !decoded_feasible {
        Some(FidelityFlag::PenaltyTooWeak)
    } else if j_repaired > j_inc {
        Some(FidelityFlag::ShapingDominates)
    } else {
        None
    };
    Ok(Fidelity {
        ground_index: best,
        ground_energy: best_e,
        decoded,
        decoded_feasible,
        repaired,
        j_repaired,
        j_inc,
        flag,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AncillaCounts {
    pub touch: usize,
    pub quad: usize,
}

/// Audit record for one jump attempt, skipped ones included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuboManifest {
    pub index: usize,
    pub iteration: u64,
    pub subset: Vec<String>,
    /// Simulated width (0 when skipped).
    pub n: usize,
    /// Model width including ancillas.
    pub width: usize,
    pub k: usize,
    pub k_max: usize,
    pub p: usize,
    pub n_max: usize,
    pub trust_radius: u32,
    pub term_counts: BTreeMap<usize, usize>,
    pub ancillas: AncillaCounts,
    pub penalty_weights: Option<PenaltyWeights>,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    pub expected_energy: Option<f64>,
    pub sample_energy: Option<f64>,
    pub shots: usize,
    pub j_before: f64,
    pub j_after: Option<f64>,
    pub accepted: bool,
    pub reason: String,
}

impl QuboManifest {
    pub fn for_model<S: Scalar>(h: &Hubo<S>, limits: &SolverLimits) -> QuboManifest {
        QuboManifest {
            index: 0,
            iteration: 0,
            subset: h.subset_ids(),
            n: 0,
            width: h.width,
            k: h.max_order,
            k_max: h.k_max,
            p: limits.depth_p,
            n_max: limits.n_max,
            trust_radius: limits.trust_radius,
            term_counts: h.term_counts(),
            ancillas: AncillaCounts {
                touch: h.count_kind(VarKind::TouchAncilla),
                quad: h.count_kind(VarKind::QuadAncilla),
            },
            penalty_weights: Some(h.penalty_weights.clone()),
            gammas: Vec::new(),
            betas: Vec::new(),
            expected_energy: None,
            sample_energy: None,
            shots: limits.shots,
            j_before: 0.0,
            j_after: None,
            accepted: false,
            reason: String::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{t1, t1_case};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn limits(k_max: usize) -> SolverLimits {
        SolverLimits { k_max, ..SolverLimits::default() }
    }

    #[test]
    fn delta_codes_cover_the_range() {
        assert_eq!(delta_weights(3), vec![1, 2, -3]);
        assert_eq!(delta_weights(1), vec![1, -1]);
        assert_eq!(delta_weights(2), vec![1, 1, -2]);
        assert_eq!(delta_weights(0), Vec::<i64>::new());
        for r in 1..=9u32 {
            let w = delta_weights(r);
            let mut seen = std::collections::BTreeSet::new();
            for m in 0..1usize << w.len() {
                seen.insert((0..w.len()).filter(|&k| m >> k & 1 == 1).map(|k| w[k]).sum::<i64>());
            }
            let expect: std::collections::BTreeSet<i64> = (-(r as i64)..=r as i64).collect();
            assert_eq!(seen, expect, "r = {r}");
        }
    }

    #[test]
    fn t1_model_width_and_orders() {
        let p = t1(10_000.0);
        let x = Allocation::new(vec![1, 4]);
        let h = build_hubo(&p, &x, &[0, 1], &limits(3)).unwrap();
        assert_eq!(ancilla_width(&h), 8);
        assert_eq!(h.count_kind(VarKind::TouchAncilla), 2);
        assert_eq!(h.count_kind(VarKind::QuadAncilla), 0);
        let orders: Vec<usize> = h.term_counts().keys().copied().collect();
        assert_eq!(orders, vec![1, 2, 3]);
        assert_eq!(h.max_order, 3);

        let h4 = build_hubo(&p, &x, &[0, 1], &limits(4)).unwrap();
        assert_eq!(h4.max_order, 4);
        assert_eq!(h4.width, 8);
    }

    #[test]
    fn single_item_quadratic_model() {
        let mut case = t1_case(10_000.0);
        case.caps.cash_cap = None;
        let p = Problem::new(case).unwrap();
        let h = build_hubo(&p, &Allocation::new(vec![0, 6]), &[1], &limits(2)).unwrap();
        assert_eq!(h.width, 3);
        assert!(h.max_order <= 2);
        assert!(h.variables.iter().all(|v| v.kind == VarKind::LotBit));
    }

    #[test]
    fn four_items_fill_sixteen() {
        let mut case = t1_case(10_000.0);
        for k in 0..2 {
            let mut extra = case.inventory[1].clone();
            extra.id = format!("UST5Y_{k}");
            case.inventory.push(extra);
        }
        case.scenarios.loss_matrix = vec![vec![0.0, 1.0, 2.0, 3.0], vec![0.0, -1.0, 0.5, 1.0]];
        let p = Problem::new(case).unwrap();
        let h = build_hubo(&p, &Allocation::new(vec![1, 2, 2, 2]), &[0, 1, 2, 3], &limits(3)).unwrap();
        assert_eq!(ancilla_width(&h), 16);
    }

    #[test]
    fn fixed_items_give_empty_model() {
        let p = t1(10_000.0);
        let l = SolverLimits { trust_radius: 0, ..SolverLimits::default() };
        assert!(matches!(
            build_hubo(&p, &Allocation::new(vec![0, 6]), &[0, 1], &l),
            Err(Error::EmptyModel(_))
        ));
    }

    #[test]
    fn map_lots_decodes_and_clamps() {
        let p = t1(10_000.0);
        let x = Allocation::new(vec![1, 4]);
        let h = build_hubo(&p, &x, &[0, 1], &limits(3)).unwrap();
        assert_eq!(map_lots(&vec![false; 8], &h, &x), x);
        let bits = encode_deltas(&h, &[1, -1]).unwrap();
        assert_eq!(map_lots(&bits, &h, &x).lots, vec![2, 3]);
        let bits = encode_deltas(&h, &[-3, 0]).unwrap();
        assert_eq!(map_lots(&bits, &h, &x).lots, vec![0, 4]);
    }

    #[test]
    fn evaluate_simple_models() {
        let h: Hubo<f64> = Hubo::from_spin_terms(2, BTreeMap::new(), 1.5);
        assert_eq!(evaluate_hubo(&h, &[true, false]), 1.5);
        let mut t = BTreeMap::new();
        t.insert(vec![0, 1], 2.0);
        let h: Hubo<f64> = Hubo::from_spin_terms(2, t, 0.0);
        assert_eq!(evaluate_hubo(&h, &[true, true]), 2.0);
        assert_eq!(evaluate_hubo(&h, &[true, false]), -2.0);
    }

    /// Independent evaluator: expand the spin polynomial with explicit ±1
    /// products.
    fn eval_spins(terms: &[(Vec<usize>, f64)], c0: f64, bits: &[bool]) -> f64 {
        let z: Vec<f64> = bits.iter().map(|&b| if b { -1.0 } else { 1.0 }).collect();
        c0 + terms.iter().map(|(k, c)| c * k.iter().map(|&j| z[j]).product::<f64>()).sum::<f64>()
    }

    #[test]
    fn evaluation_matches_independent_evaluator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let width = rng.gen_range(1..=10);
            let mut terms = BTreeMap::new();
            for _ in 0..rng.gen_range(1..20) {
                let order = rng.gen_range(1..=width.min(4));
                let mut k: Vec<usize> = rand::seq::index::sample(&mut rng, width, order).into_vec();
                k.sort_unstable();
                terms.insert(k, rng.gen_range(-3.0..3.0));
            }
            let list: Vec<(Vec<usize>, f64)> = terms.clone().into_iter().collect();
            let h: Hubo<f64> = Hubo::from_spin_terms(width, terms, 0.25);
            for _ in 0..100 {
                let bits: Vec<bool> = (0..width).map(|_| rng.gen()).collect();
                assert!((evaluate_hubo(&h, &bits) - eval_spins(&list, 0.25, &bits)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn built_model_spin_and_binary_forms_agree() {
        let p = t1(10_000.0);
        let x = Allocation::new(vec![1, 4]);
        for k in 2..=4 {
            let h = build_hubo(&p, &x, &[0, 1], &limits(k)).unwrap();
            assert!(h.terms.keys().all(|t| t.len() <= k));
            for idx in 0..1usize << h.width {
                let b = bits_of(idx, h.width);
                assert!((evaluate_hubo(&h, &b) - h.binary.eval(&b)).abs() < 1e-9 * h.binary.eval(&b).abs().max(1.0));
            }
        }
    }

    #[test]
    fn touch_consistency_is_free_for_set_bits() {
        let p = t1(10_000.0);
        let x = Allocation::new(vec![1, 4]);
        let h = build_hubo(&p, &x, &[0, 1], &limits(3)).unwrap();
        // δ = (+1, 0): touch t_0 set is cheaper than unset.
        let mut bits = encode_deltas(&h, &[1, 0]).unwrap();
        let on = h.binary.eval(&bits);
        bits[h.items[0].touch.unwrap()] = false;
        assert!(on < h.binary.eval(&bits));
    }

    #[test]
    fn t1_ground_state_improves_or_flags() {
        let p = t1(10_000.0);
        for start in [vec![1, 4], vec![0, 6], vec![2, 3], vec![0, 7]] {
            let x = repair(&Allocation::new(start), &p).allocation;
            for k in 2..=4 {
                let h = build_hubo(&p, &x, &[0, 1], &limits(k)).unwrap();
                let f = ground_state_check(&h, &p, &x).unwrap();
                assert!(f.j_repaired <= f.j_inc || f.flag.is_some(), "{f:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn delta_round_trip(d0 in -3i64..=3, d1 in -3i64..=3) {
            let p = t1(10_000.0);
            let x = Allocation::new(vec![3, 4]);
            let h = build_hubo(&p, &x, &[0, 1], &limits(3)).unwrap();
            let bits = encode_deltas(&h, &[d0, d1]).unwrap();
            prop_assert_eq!(h.items[0].delta(&bits), d0);
            prop_assert_eq!(h.items[1].delta(&bits), d1);
        }
    }
}
