//! Small pinned cases used by tests, examples and documentation.

use crate::data_model::{
    BufferSpec, CapLimit, Caps, CaseInput, CsaTerms, Eligibility, HaircutMatrix, InventoryItem,
    Regime, RegimeSelector, ScenarioSet, SolverLimits, Weights, Window,
};
use crate::money::{Fraction, Money};
use crate::problem::Problem;

/// Two-asset case T1: one cash line (v = 10,000, carry 1.0) and one bond
/// line (10,000 face at par, 5% haircut under m1 → v = 9,500, carry 0.5),
/// R_eff = 50,000, 20% cash cap, hard window with buffer `buffer`.
pub fn t1_case(buffer: f64) -> CaseInput {
    let mut haircuts = HaircutMatrix::default();
    haircuts.insert("US-GOVT", "govt_5y", Regime::Sp, 0.04);
    haircuts.insert("US-GOVT", "govt_5y", Regime::M1, 0.05);
    haircuts.insert("US-GOVT", "govt_5y", Regime::M2, 0.08);
    let item = |id: &str, class: &str, bucket: &str, icad: &str, max: u32, carry: f64, cash: bool| {
        InventoryItem {
            id: id.into(),
            asset_class: class.into(),
            issuer: if cash { "USD".into() } else { "UST".into() },
            bucket: bucket.into(),
            currency: "USD".into(),
            icad: icad.into(),
            price: 1.0,
            unit: Money::from_units(10_000.0),
            current_lots: 0,
            max_lots: max,
            carry_cost: carry,
            is_cash: cash,
            eligible: true,
        }
    };
    CaseInput {
        terms: CsaTerms::with_rounding(Money::from_units(10_000.0)),
        regime: RegimeSelector::uniform(Regime::M1),
        haircuts,
        eligibility: Eligibility::default(),
        caps: Caps {
            cash_cap: Some(CapLimit::FractionOfU(Fraction::from_f64(0.2))),
            ..Caps::default()
        },
        window: Window {
            buffer: BufferSpec::Absolute(Money::from_units(buffer)),
            hard_cap_enabled: true,
        },
        exposure: Money::from_units(50_000.0),
        exposure_timestamp: None,
        inventory: vec![
            item("CASH", "Cash", "cash", "CASH", 6, 1.0, true),
            item("UST5Y", "Govt", "govt_5y", "US-GOVT", 8, 0.5, false),
        ],
        scenarios: ScenarioSet {
            loss_matrix: vec![vec![0.0, 120.0], vec![0.0, -40.0]],
            raw_weights: vec![0.5, 0.5],
            alpha: 0.9,
        },
        weights: Weights::zero(),
        solver_limits: SolverLimits::default(),
        audit_flags: Default::default(),
        span_citations: Vec::new(),
    }
}

pub fn t1(buffer: f64) -> Problem {
    Problem::new(t1_case(buffer)).expect("T1 is valid")
}
