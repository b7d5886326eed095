//! Seeded synthetic cases: USD cash plus a government/agency/credit ladder
//! with tiered haircuts, and factor-model scenario losses.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data_model::{
    BufferSpec, CapLimit, Caps, CaseInput, CsaTerms, Eligibility, HaircutMatrix, InventoryItem,
    Regime, RegimeSelector, ScenarioSet, SolverLimits, WeightsProvenance, Window,
};
use crate::fixtures::t1_case;
use crate::money::{Fraction, Money};
use crate::objective::calibrate_weights;
use crate::problem::Problem;
use crate::requirement::min_buffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    /// The two-line T1 fixture.
    Tiny,
    Desk,
    /// Desk shape with issuer, class and single-line caps that bind.
    CapTight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub mode: GenMode,
    pub n_items: usize,
    /// Multiplier on lot face amounts.
    pub exposure_scale: f64,
    pub regime: Regime,
    pub buffer_bps: f64,
    pub cash_cap: Option<f64>,
    /// 0 = loose caps, 1 = tightest.
    pub cap_tightness: f64,
    pub scenarios: usize,
    /// Upper bound on Π(m_i + 1) for enumerable desk cases.
    pub max_search_space: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            mode: GenMode::Desk,
            n_items: 6,
            exposure_scale: 1.0,
            regime: Regime::M1,
            buffer_bps: 1_000.0,
            cash_cap: Some(0.4),
            cap_tightness: 0.0,
            scenarios: 16,
            max_search_space: 2e5,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn tiny() -> GenSpec {
        GenSpec { mode: GenMode::Tiny, n_items: 2, buffer_bps: 2_000.0, ..GenSpec::default() }
    }

    pub fn desk(seed: u64) -> GenSpec {
        GenSpec { seed, ..GenSpec::default() }
    }

    pub fn cap_tight(seed: u64) -> GenSpec {
        GenSpec {
            mode: GenMode::CapTight,
            n_items: 7,
            cash_cap: Some(0.15),
            cap_tightness: 0.7,
            seed,
            ..GenSpec::default()
        }
    }
}

struct Template {
    class: &'static str,
    issuer: &'static str,
    bucket: &'static str,
    icad: &'static str,
    tenor: f64,
    haircut: f64,
    duration: f64,
    carry_bps: f64,
    credit_beta: f64,
}

const LADDER: [Template; 10] = [
    Template { class: "Govt", issuer: "UST", bucket: "govt_0_1y", icad: "US-GOVT", tenor: 0.5, haircut: 0.005, duration: 0.5, carry_bps: 4.0, credit_beta: 0.0 },
    Template { class: "Govt", issuer: "UST", bucket: "govt_1_3y", icad: "US-GOVT", tenor: 2.0, haircut: 0.01, duration: 1.9, carry_bps: 6.0, credit_beta: 0.0 },
    Template { class: "Govt", issuer: "UST", bucket: "govt_3_7y", icad: "US-GOVT", tenor: 5.0, haircut: 0.02, duration: 4.6, carry_bps: 8.0, credit_beta: 0.0 },
    Template { class: "Govt", issuer: "UST", bucket: "govt_7_15y", icad: "US-GOVT", tenor: 10.0, haircut: 0.03, duration: 8.5, carry_bps: 10.0, credit_beta: 0.0 },
    Template { class: "Govt", issuer: "UST", bucket: "govt_15y_plus", icad: "US-GOVT", tenor: 20.0, haircut: 0.05, duration: 15.0, carry_bps: 12.0, credit_beta: 0.0 },
    Template { class: "TIPS", issuer: "UST", bucket: "tips_3_7y", icad: "US-TIPS", tenor: 5.0, haircut: 0.03, duration: 4.8, carry_bps: 11.0, credit_beta: 0.2 },
    Template { class: "Agency", issuer: "FNMA", bucket: "agency_3_7y", icad: "US-AGENCY", tenor: 5.0, haircut: 0.035, duration: 4.3, carry_bps: 14.0, credit_beta: 0.5 },
    Template { class: "MBS", issuer: "FNMA", bucket: "mbs_aaa", icad: "US-MBS", tenor: 7.0, haircut: 0.05, duration: 5.5, carry_bps: 18.0, credit_beta: 0.8 },
    Template { class: "Corp", issuer: "ACME", bucket: "corp_ig_3_7y", icad: "US-CORP-IG", tenor: 5.0, haircut: 0.08, duration: 4.4, carry_bps: 25.0, credit_beta: 1.5 },
    Template { class: "Corp", issuer: "GLOBEX", bucket: "corp_ig_7_15y", icad: "US-CORP-IG", tenor: 10.0, haircut: 0.1, duration: 7.5, carry_bps: 28.0, credit_beta: 2.0 },
];

const CASH_CARRY_BPS: f64 = 40.0;
const RA: f64 = 10_000.0;

/// Haircuts by regime for a base (m1) haircut: sp is looser, m2 tighter.
fn regime_haircuts(base: f64) -> [(Regime, f64); 3] {
    let r = |x: f64| (x * 10_000.0).round() / 10_000.0;
    [(Regime::Sp, r(base * 0.8)), (Regime::M1, r(base)), (Regime::M2, r(base * 1.5 + 0.01))]
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn draw(spec: &GenSpec, rng: &mut ChaCha8Rng) -> CaseInput {
    let n = spec.n_items.max(1);
    let mut haircuts = HaircutMatrix::default();
    let mut inventory = Vec::with_capacity(n);
    let mut durations = vec![0.0];
    let mut tenors = vec![0.0];
    let mut betas = vec![0.0];
    let faces = [250_000.0, 500_000.0, 1_000_000.0];

    let cash_unit = (250_000.0 * spec.exposure_scale / RA).round().max(1.0) * RA;
    inventory.push(InventoryItem {
        id: "USD_CASH".into(),
        asset_class: "Cash".into(),
        issuer: "USD".into(),
        bucket: "cash".into(),
        currency: "USD".into(),
        icad: "CASH".into(),
        price: 1.0,
        unit: Money::from_units(cash_unit),
        current_lots: 0,
        max_lots: 0,
        carry_cost: round2(cash_unit * CASH_CARRY_BPS / 10_000.0 / 360.0),
        is_cash: true,
        eligible: true,
    });
    let start = rng.gen_range(0..LADDER.len());
    for k in 1..n {
        let t = &LADDER[(start + k - 1) % LADDER.len()];
        let round = (k - 1) / LADDER.len();
        let id = if round == 0 {
            format!("{}_{}", t.issuer, t.bucket.to_uppercase())
        } else {
            format!("{}_{}_{}", t.issuer, t.bucket.to_uppercase(), round + 1)
        };
        for (r, h) in regime_haircuts(t.haircut) {
            haircuts.insert(t.icad, t.bucket, r, h);
        }
        let face = (faces[rng.gen_range(0..faces.len())] * spec.exposure_scale / RA).round().max(1.0) * RA;
        let price = (rng.gen_range(0.95..1.05f64) * 10_000.0).round() / 10_000.0;
        let carry_bps = t.carry_bps * rng.gen_range(0.7..1.3);
        inventory.push(InventoryItem {
            id,
            asset_class: t.class.into(),
            issuer: t.issuer.into(),
            bucket: t.bucket.into(),
            currency: "USD".into(),
            icad: t.icad.into(),
            price,
            unit: Money::from_units(face),
            current_lots: 0,
            max_lots: 0,
            carry_cost: round2(face * price * carry_bps / 10_000.0 / 360.0),
            is_cash: false,
            eligible: true,
        });
        durations.push(t.duration);
        tenors.push(t.tenor);
        betas.push(t.credit_beta);
    }

    // Lot bounds within the enumerable budget.
    let mut max_lots: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=6)).collect();
    while max_lots.iter().map(|&m| m as f64 + 1.0).product::<f64>() > spec.max_search_space {
        let (k, _) = max_lots.iter().enumerate().max_by_key(|(k, &m)| (m, std::cmp::Reverse(*k))).unwrap();
        max_lots[k] -= 1;
    }
    for (item, &m) in inventory.iter_mut().zip(&max_lots) {
        item.max_lots = m;
        item.current_lots = if m > 0 && rng.gen_bool(0.3) { rng.gen_range(0..=m.min(2)) } else { 0 };
    }

    // Approximate capacity at the chosen regime sets the exposure.
    let haircut_of = |i: usize| {
        if inventory[i].is_cash {
            0.0
        } else {
            haircuts.get(&inventory[i].icad, &inventory[i].bucket, spec.regime).unwrap_or(0.0)
        }
    };
    let lot_value = |i: usize| inventory[i].unit.units() * inventory[i].price * (1.0 - haircut_of(i));
    let capacity: f64 = (0..n).map(|i| lot_value(i) * inventory[i].max_lots as f64).sum();
    let exposure = (capacity * rng.gen_range(0.35..0.6) / RA).ceil() * RA;

    // Two rate factors (level, slope) plus an idiosyncratic credit term.
    let level = Normal::new(0.0f64, 0.01).unwrap();
    let slope = Normal::new(0.0f64, 0.004).unwrap();
    let idio = Normal::new(0.0f64, 0.003).unwrap();
    let s = spec.scenarios;
    let mut loss_matrix = Vec::with_capacity(s);
    for _ in 0..s {
        let (f1, f2) = (level.sample(rng), slope.sample(rng));
        let row = (0..n)
            .map(|i| {
                if inventory[i].is_cash {
                    0.0
                } else {
                    let tenor_tilt = (tenors[i] - 5.0) / 10.0;
                    let shock = f1 + f2 * tenor_tilt + betas[i] * idio.sample(rng).abs();
                    round2(lot_value(i) * durations[i] * shock)
                }
            })
            .collect();
        loss_matrix.push(row);
    }

    let mut caps = Caps {
        cash_cap: spec.cash_cap.map(|f| CapLimit::FractionOfU(Fraction::from_f64(f))),
        ..Caps::default()
    };
    if spec.mode == GenMode::CapTight {
        let t = spec.cap_tightness.clamp(0.0, 1.0);
        let frac = |x: f64| CapLimit::FractionOfU(Fraction::from_f64((x * 1_000.0).round() / 1_000.0));
        caps.issuer_cap.insert("UST".into(), frac(0.7 - 0.35 * t));
        caps.class_cap.insert("Corp".into(), frac(0.35 - 0.15 * t));
        caps.global_cap = Some(frac(0.6 - 0.3 * t));
    }

    let provenance = WeightsProvenance {
        ops_move_cost: 100.0,
        horizon_days: 5,
        cvar_price_per_mm_day: 20.0,
        funding_bps_annual: 50.0,
        day_count: 360,
        content_hash: String::new(),
        timestamp: None,
    };
    let mut terms = CsaTerms::with_rounding(Money::from_units(RA));
    terms.mta = Money::from_units(RA);

    CaseInput {
        terms,
        regime: RegimeSelector::uniform(spec.regime),
        haircuts,
        eligibility: Eligibility::default(),
        caps,
        window: Window {
            buffer: BufferSpec::Bps(spec.buffer_bps),
            hard_cap_enabled: true,
        },
        exposure: Money::from_units(exposure),
        exposure_timestamp: None,
        inventory,
        scenarios: ScenarioSet {
            loss_matrix,
            raw_weights: vec![1.0 / s as f64; s],
            alpha: 0.95,
        },
        weights: calibrate_weights(&provenance).expect("fixed provenance calibrates"),
        solver_limits: SolverLimits { seed: spec.seed, ..SolverLimits::default() },
        audit_flags: Default::default(),
        span_citations: Vec::new(),
    }
}

fn window_feasible(case: &CaseInput) -> bool {
    let Ok(p) = Problem::new(case.clone()) else { return false };
    matches!(min_buffer(&p, true), Ok(b) if b.b_star_exact.is_some_and(|x| x <= p.buffer))
}

/// Deterministic in `spec`. Desk and cap-tight cases are redrawn (from the
/// same seeded stream) until the coverage window admits a cover, up to 64
/// draws.
pub fn generate(spec: &GenSpec) -> CaseInput {
    if spec.mode == GenMode::Tiny {
        return t1_case(50_000.0 * spec.buffer_bps / 10_000.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut case = draw(spec, &mut rng);
    for _ in 1..64 {
        if window_feasible(&case) {
            break;
        }
        case = draw(spec, &mut rng);
    }
    case
}

/// Every haircut cell, keyed `icad|bucket` → regime → haircut.
pub fn haircut_table(case: &CaseInput) -> BTreeMap<(String, String), BTreeMap<Regime, f64>> {
    let mut out: BTreeMap<(String, String), BTreeMap<Regime, f64>> = BTreeMap::new();
    for (k, &h) in &case.haircuts.entries {
        out.entry((k.icad.clone(), k.bucket.clone())).or_default().insert(k.regime, h);
    }
    out
}
