//! Reference heuristics BL-1 (density greedy), BL-2 (bucket-first fill plus
//! repair) and BL-3 (2-opt improvement).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::explorer::{repair, violation};
use crate::money::Money;
use crate::objective::j_value;
use crate::problem::Problem;
use crate::requirement::{fill_toward, is_feasible, lot_fits_caps, Allocation};

/// Eligible item indices by ascending carry density, then higher lot value,
/// then id.
pub(crate) fn density_order(p: &Problem) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).filter(|&i| p.upper[i] > 0).collect();
    order.sort_by(|&a, &b| density_cmp(p, a, b));
    order
}

pub(crate) fn density_cmp(p: &Problem, a: usize, b: usize) -> Ordering {
    p.density(a)
        .total_cmp(&p.density(b))
        .then_with(|| p.values[b].cmp(&p.values[a]))
        .then_with(|| p.item_id(a).cmp(p.item_id(b)))
}

/// True when one more lot of `i` keeps the caps and the U-cap, if any.
/// Caps are judged at the current coverage unless no item fits that way,
/// in which case fraction caps are judged at max(U, R_eff).
fn addable(p: &Problem, lots: &mut [u32], i: usize, u: Money, toward: bool) -> bool {
    let next = u + p.values[i];
    if p.window_top().is_some_and(|top| next > top) {
        return false;
    }
    lot_fits_caps(p, lots, i, u, toward)
}

/// BL-1: add one lot at a time of the lowest-density addable item, until coverage reaches R_eff. May stop short.
pub fn bl1_density_greedy(p: &Problem) -> Allocation {
    let order = density_order(p);
    let mut lots = vec![0u32; p.len()];
    let mut u = Money::ZERO;
    while u < p.r_eff {
        let toward = fill_toward(p, &mut lots, u);
        let Some(&i) = order.iter().find(|&&i| addable(p, &mut lots, i, u, toward)) else {
            break;
        };
        lots[i] += 1;
        u += p.values[i];
    }
    Allocation::new(lots)
}

/// BL-2: pro-rata fill per bucket (buckets by descending after-haircut
/// capacity), each bucket targeting its capacity share of R_eff, then repair.
pub fn bl2_bucket_first(p: &Problem) -> Allocation {
    repair(&bl2_fill(p), p).allocation
}

fn bl2_fill(p: &Problem) -> Allocation {
    let inv = &p.case().inventory;
    let mut buckets: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for i in density_order(p) {
        buckets.entry(inv[i].bucket.as_str()).or_default().push(i);
    }
    let capacity = |items: &[usize]| -> i64 {
        items
            .iter()
            .map(|&i| p.values[i].cents() * p.upper[i] as i64)
            .sum()
    };
    let total: i64 = buckets.values().map(|b| capacity(b)).sum();
    let mut ordered: Vec<(&str, Vec<usize>)> = buckets.into_iter().collect();
    ordered.sort_by(|a, b| capacity(&b.1).cmp(&capacity(&a.1)).then(a.0.cmp(b.0)));

    let mut lots = vec![0u32; p.len()];
    let mut u = Money::ZERO;
    for (_, items) in &ordered {
        if total == 0 {
            break;
        }
        let target = (p.r_eff.cents() as i128 * capacity(items) as i128 / total as i128) as i64;
        let mut filled = 0i64;
        while filled < target {
            let toward = fill_toward(p, &mut lots, u);
            let Some(&i) = items.iter().find(|&&i| addable(p, &mut lots, i, u, toward)) else {
                break;
            };
            lots[i] += 1;
            u += p.values[i];
            filled += p.values[i].cents();
        }
    }
    Allocation::new(lots)
}

/// BL-3 over BL-1; when that stays infeasible, BL-3 again from its repair.
/// The result may still be infeasible.
pub fn bl3_with_repair(p: &Problem) -> Allocation {
    let x = bl3_two_opt(p, &bl1_density_greedy(p));
    if is_feasible(p, &x.lots) {
        return x;
    }
    let fixed = repair(&x, p);
    if fixed.feasible {
        bl3_two_opt(p, &fixed.allocation)
    } else {
        x
    }
}

/// BL-3: first-improvement local search over single-lot removals and
/// pairwise moves (−1 lot of `a`, +1 lot of `b`), scanned in ascending id
/// order. From an infeasible seed a move is improving when it lowers the
/// violation; from a feasible one, when it stays feasible and lowers J.
pub fn bl3_two_opt(p: &Problem, seed: &Allocation) -> Allocation {
    let ids = &p.id_order;
    let mut x = seed.lots.clone();
    for (xi, &m) in x.iter_mut().zip(&p.upper) {
        *xi = (*xi).min(m);
    }
    let score = |lots: &[u32]| -> (bool, f64) {
        if is_feasible(p, lots) {
            (true, j_value(p, lots))
        } else {
            (false, violation(p, lots))
        }
    };
    let better = |new: (bool, f64), old: (bool, f64)| match (new.0, old.0) {
        (true, false) => true,
        (false, true) => false,
        _ => new.1 < old.1,
    };
    let mut cur = score(&x);
    'outer: loop {
        for &a in ids {
            if x[a] == 0 {
                continue;
            }
            x[a] -= 1;
            let s = score(&x);
            if better(s, cur) {
                cur = s;
                continue 'outer;
            }
            for &b in ids {
                if b == a || x[b] >= p.upper[b] {
                    continue;
                }
                x[b] += 1;
                let s = score(&x);
                if better(s, cur) {
                    cur = s;
                    continue 'outer;
                }
                x[b] -= 1;
            }
            x[a] += 1;
        }
        break;
    }
    Allocation::new(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certifier::brute_force;
    use crate::data_model::{CapLimit, InventoryItem};
    use crate::fixtures::{t1, t1_case};
    use crate::money::Fraction;
    use crate::requirement::check_feasible;

    #[test]
    fn bl1_on_t1_fills_bonds() {
        let p = t1(10_000.0);
        let x = bl1_density_greedy(&p);
        assert_eq!(x.lots, vec![0, 6]);
        assert_eq!(x.coverage(&p), Money::from_units(57_000.0));
    }

    #[test]
    fn bl1_single_item_fills_ceiling() {
        let mut case = t1_case(100_000.0);
        case.inventory.remove(0);
        case.caps.cash_cap = None;
        case.scenarios.loss_matrix = vec![vec![1.0]];
        case.scenarios.raw_weights = vec![1.0];
        let p = Problem::new(case).unwrap();
        // ceil(50,000 / 9,500) = 6
        assert_eq!(bl1_density_greedy(&p).lots, vec![6]);
    }

    #[test]
    fn bl1_blocked_by_caps_reports_shortfall() {
        let mut case = t1_case(10_000.0);
        case.inventory.remove(1);
        case.scenarios.loss_matrix = vec![vec![0.0], vec![0.0]];
        let p = Problem::new(case).unwrap();
        let x = bl1_density_greedy(&p);
        // 10,000 is exactly 20% of R_eff; the second lot breaks the cap
        assert_eq!(x.lots, vec![1]);
        assert!(!check_feasible(&x, &p).feasible);
    }

    #[test]
    fn bl2_on_t1_matches_optimum() {
        let p = t1(10_000.0);
        assert_eq!(bl2_bucket_first(&p).lots, vec![0, 6]);
    }

    fn two_bucket_case() -> Problem {
        let mut case = t1_case(40_000.0);
        case.caps.cash_cap = None;
        let mut corp: InventoryItem = case.inventory[1].clone();
        corp.id = "CORP".into();
        corp.asset_class = "Corp".into();
        corp.bucket = "corp_a".into();
        corp.icad = "US-CORP".into();
        corp.carry_cost = 0.3;
        case.haircuts
            .insert("US-CORP", "corp_a", crate::data_model::Regime::M1, 0.05);
        case.inventory = vec![case.inventory[1].clone(), corp];
        case.scenarios.loss_matrix = vec![vec![1.0, 2.0], vec![0.0, 1.0]];
        for class in ["Govt", "Corp"] {
            case.caps
                .class_cap
                .insert(class.into(), CapLimit::FractionOfU(Fraction::from_f64(0.5)));
        }
        Problem::new(case).unwrap()
    }

    #[test]
    fn bl2_respects_class_caps_before_repair() {
        let p = two_bucket_case();
        let fill = bl2_fill(&p);
        let u = fill.coverage(&p).max(p.r_eff);
        assert!(p.caps.iter().all(|c| c.admits(p.group_value(c, &fill.lots), u)), "{fill:?}");
    }

    #[test]
    fn bl2_without_caps_covers() {
        let mut case = t1_case(10_000.0);
        case.caps.cash_cap = None;
        let p = Problem::new(case).unwrap();
        let x = bl2_bucket_first(&p);
        assert!(x.coverage(&p) >= p.r_eff);
    }

    #[test]
    fn bl3_keeps_a_two_opt_optimum() {
        let p = t1(10_000.0);
        let seed = bl1_density_greedy(&p);
        let x = bl3_two_opt(&p, &seed);
        assert_eq!(x, seed);
        assert_eq!(bl3_two_opt(&p, &x), x);
    }

    #[test]
    fn bl3_swaps_expensive_cash_for_bond() {
        // Three lines: cash, bond, corp; start with one cash lot in the mix.
        let mut case = t1_case(20_000.0);
        case.caps.cash_cap = None;
        let mut corp = case.inventory[1].clone();
        corp.id = "CORP".into();
        corp.carry_cost = 0.9;
        corp.bucket = "corp_a".into();
        corp.icad = "US-CORP".into();
        case.haircuts
            .insert("US-CORP", "corp_a", crate::data_model::Regime::M1, 0.05);
        case.inventory.push(corp);
        case.scenarios.loss_matrix = vec![vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 0.0]];
        let p = Problem::new(case).unwrap();
        let seed = Allocation::new(vec![1, 5, 0]); // 57,500
        assert!(is_feasible(&p, &seed.lots));
        let x = bl3_two_opt(&p, &seed);
        assert_eq!(x.lots, vec![0, 6, 0]);
        let (best, j) = brute_force(&p).unwrap().unwrap();
        assert_eq!(best.lots, x.lots);
        assert_eq!(j, j_value(&p, &x.lots));
    }

    #[test]
    fn baselines_are_deterministic() {
        let p = two_bucket_case();
        assert_eq!(bl1_density_greedy(&p), bl1_density_greedy(&p));
        assert_eq!(bl2_bucket_first(&p), bl2_bucket_first(&p));
        let s = bl1_density_greedy(&p);
        assert_eq!(bl3_two_opt(&p, &s), bl3_two_opt(&p, &s));
    }
}
