//! A case compiled into flat per-item vectors for the optimizers.

use serde::Serialize;

use crate::data_model::{lot_valuation, CapLimit, CaseInput, ValuationRow};
use crate::error::Result;
use crate::money::Money;
use crate::requirement::effective_requirement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapKind {
    Cash,
    Issuer,
    Class,
    Currency,
    Global,
}

/// One concentration limit over a group of items: `Σ_{members} v_i x_i ≤ limit`,
/// where a fractional limit is taken of total coverage U.
#[derive(Debug, Clone, PartialEq)]
pub struct CapConstraint {
    pub id: String,
    pub kind: CapKind,
    pub members: Vec<usize>,
    pub limit: CapLimit,
}

impl CapConstraint {
    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn bound(&self, coverage: Money) -> Money {
        match self.limit {
            CapLimit::Absolute(m) => m,
            CapLimit::FractionOfU(f) => f.of(coverage),
        }
    }

    pub fn admits(&self, lhs: Money, coverage: Money) -> bool {
        match self.limit {
            CapLimit::Absolute(m) => lhs <= m,
            CapLimit::FractionOfU(f) => f.admits(lhs, coverage),
        }
    }

    /// Bound minus lhs, in currency units, without rounding the fractional bound.
    pub fn slack_units(&self, lhs: Money, coverage: Money) -> f64 {
        match self.limit {
            CapLimit::Absolute(m) => (m - lhs).units(),
            CapLimit::FractionOfU(f) => f.of_units(coverage) - lhs.units(),
        }
    }

    /// Coefficient of one lot of item `i` in the linearized form
    /// `Σ a_i x_i ≤ b` (currency units).
    pub fn coefficient(&self, i: usize, lot_value: Money) -> f64 {
        let member = if self.contains(i) { 1.0 } else { 0.0 };
        match self.limit {
            CapLimit::Absolute(_) => member * lot_value.units(),
            CapLimit::FractionOfU(f) => (member - f.to_f64()) * lot_value.units(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IneligibleItem {
    pub instrument: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Problem {
    case: CaseInput,
    pub r_eff: Money,
    /// Window buffer B resolved against `r_eff`.
    pub buffer: Money,
    pub hard_cap: bool,
    pub mta: Money,
    pub values: Vec<Money>,
    /// Upper lot bound per item; zero for ineligible items.
    pub upper: Vec<u32>,
    pub holdings: Vec<u32>,
    pub carry: Vec<f64>,
    pub eligible: Vec<bool>,
    pub is_cash: Vec<bool>,
    pub valuation: Vec<ValuationRow>,
    pub ineligible: Vec<IneligibleItem>,
    pub caps: Vec<CapConstraint>,
    /// Scenario losses per lot, row-major `scenarios × items`.
    pub losses: Vec<f64>,
    pub scenario_weights: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    /// Item indices in ascending id order.
    pub id_order: Vec<usize>,
}

impl Problem {
    pub fn new(case: CaseInput) -> Result<Problem> {
        case.validate()?;
        let n = case.inventory.len();
        let r_eff = effective_requirement(case.exposure, &case.terms);
        let buffer = case.window.resolve(r_eff);

        let mut values = vec![Money::ZERO; n];
        let mut upper = vec![0; n];
        let mut eligible = vec![false; n];
        let mut valuation = Vec::new();
        let mut ineligible = Vec::new();
        for (i, item) in case.inventory.iter().enumerate() {
            let reason = if !item.eligible {
                Some("flagged ineligible".to_string())
            } else if !case.eligibility.admits(&item.asset_class, &item.bucket) {
                Some(format!(
                    "({}, {}) not in schedule A",
                    item.asset_class, item.bucket
                ))
            } else {
                None
            };
            match (reason, lot_valuation(item, &case.haircuts, &case.regime)) {
                (None, Ok(row)) if row.lot_value > Money::ZERO => {
                    values[i] = row.lot_value;
                    upper[i] = item.max_lots;
                    eligible[i] = true;
                    valuation.push(row);
                }
                (None, Ok(_)) => ineligible.push(IneligibleItem {
                    instrument: item.id.clone(),
                    reason: "zero lot value".into(),
                }),
                (Some(reason), _) => ineligible.push(IneligibleItem {
                    instrument: item.id.clone(),
                    reason,
                }),
                (None, Err(e)) => ineligible.push(IneligibleItem {
                    instrument: item.id.clone(),
                    reason: e.to_string(),
                }),
            }
        }

        let caps = compile_caps(&case);
        let s = case.scenarios.len();
        let mut losses = Vec::with_capacity(s * n);
        for row in &case.scenarios.loss_matrix {
            losses.extend_from_slice(row);
        }
        let scenario_weights = if s == 0 {
            Vec::new()
        } else {
            case.scenarios.normalized_weights()
        };
        let mut id_order: Vec<usize> = (0..n).collect();
        id_order.sort_by(|&a, &b| case.inventory[a].id.cmp(&case.inventory[b].id));

        Ok(Problem {
            r_eff,
            buffer,
            hard_cap: case.window.hard_cap_enabled,
            mta: case.terms.mta,
            upper,
            holdings: case.inventory.iter().map(|i| i.current_lots).collect(),
            carry: case.inventory.iter().map(|i| i.carry_cost).collect(),
            is_cash: case.inventory.iter().map(|i| i.is_cash).collect(),
            eligible,
            values,
            valuation,
            ineligible,
            caps,
            losses,
            scenario_weights,
            alpha: case.scenarios.alpha,
            lambda: case.weights.lambda_movement,
            mu: case.weights.mu_cvar,
            gamma: case.weights.gamma_overshoot,
            id_order,
            case,
        })
    }

    pub fn case(&self) -> &CaseInput {
        &self.case
    }

    pub fn into_case(self) -> CaseInput {
        self.case
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenario_weights.len()
    }

    pub fn item_id(&self, i: usize) -> &str {
        &self.case.inventory[i].id
    }

    /// Upper end of the coverage window, if the hard cap is on.
    pub fn window_top(&self) -> Option<Money> {
        self.hard_cap.then(|| self.r_eff + self.buffer)
    }

    pub fn coverage(&self, lots: &[u32]) -> Money {
        Money(
            lots.iter()
                .zip(&self.values)
                .map(|(&x, v)| x as i64 * v.cents())
                .sum(),
        )
    }

    pub fn group_value(&self, cap: &CapConstraint, lots: &[u32]) -> Money {
        Money(
            cap.members
                .iter()
                .map(|&i| lots[i] as i64 * self.values[i].cents())
                .sum(),
        )
    }

    /// Coverage achievable with every item at its upper bound.
    pub fn max_coverage(&self) -> Money {
        self.coverage(&self.upper)
    }

    /// Carry per unit of after-haircut value; `+∞` for ineligible items.
    pub fn density(&self, i: usize) -> f64 {
        if self.values[i] > Money::ZERO {
            self.carry[i] / self.values[i].units()
        } else {
            f64::INFINITY
        }
    }

    /// Scenario loss row `s` (one entry per item).
    pub fn loss_row(&self, s: usize) -> &[f64] {
        let n = self.len();
        &self.losses[s * n..(s + 1) * n]
    }
}

fn compile_caps(case: &CaseInput) -> Vec<CapConstraint> {
    let inv = &case.inventory;
    let members = |pred: &dyn Fn(usize) -> bool| -> Vec<usize> {
        (0..inv.len()).filter(|&i| pred(i)).collect()
    };
    let mut caps = Vec::new();
    if let Some(limit) = case.caps.cash_cap {
        caps.push(CapConstraint {
            id: "cash_cap".into(),
            kind: CapKind::Cash,
            members: members(&|i| inv[i].is_cash),
            limit,
        });
    }
    for (issuer, limit) in &case.caps.issuer_cap {
        caps.push(CapConstraint {
            id: format!("issuer_cap:{issuer}"),
            kind: CapKind::Issuer,
            members: members(&|i| &inv[i].issuer == issuer),
            limit: *limit,
        });
    }
    for (class, limit) in &case.caps.class_cap {
        caps.push(CapConstraint {
            id: format!("class_cap:{class}"),
            kind: CapKind::Class,
            members: members(&|i| &inv[i].asset_class == class),
            limit: *limit,
        });
    }
    for (ccy, limit) in &case.caps.currency_cap {
        caps.push(CapConstraint {
            id: format!("currency_cap:{ccy}"),
            kind: CapKind::Currency,
            members: members(&|i| &inv[i].currency == ccy),
            limit: *limit,
        });
    }
    if let Some(limit) = case.caps.global_cap {
        for (i, item) in inv.iter().enumerate() {
            caps.push(CapConstraint {
                id: format!("global_cap:{}", item.id),
                kind: CapKind::Global,
                members: vec![i],
                limit,
            });
        }
    }
    caps
}
