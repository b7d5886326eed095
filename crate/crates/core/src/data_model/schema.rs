//! On-disk case file schema (UTF-8 JSON) and its conversion to and from
//! [`CaseInput`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    BufferSpec, CapLimit, Caps, CaseInput, CsaTerms, Eligibility, GoverningLaw, HaircutKey,
    HaircutMatrix, InventoryItem, Regime, RegimeSelector, ScenarioSet, SolverLimits, Weights,
    WeightsProvenance, Window,
};
use crate::canonical::to_canonical_bytes;
use crate::error::{Error, Result};
use crate::money::{Fraction, Money};
use crate::objective::calibrate_weights;

#[derive(Debug, Serialize, Deserialize)]
struct CaseFile {
    csa: CsaSection,
    #[serde(default)]
    haircuts: HaircutsSection,
    #[serde(default)]
    eligibility: EligibilitySection,
    #[serde(default)]
    caps: CapsSection,
    window: WindowSection,
    exposure: ExposureSection,
    #[serde(default)]
    scenarios: ScenariosSection,
    inventory: Vec<ItemRecord>,
    #[serde(default)]
    costs: CostsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<WeightsRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights_provenance: Option<ProvenanceRecord>,
    #[serde(default)]
    audit: AuditSection,
    #[serde(default)]
    solver: SolverSection,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsaSection {
    #[serde(default)]
    meta: MetaRecord,
    terms: TermsRecord,
    regime: RegimeRecord,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    span_citations: Vec<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaRecord {
    #[serde(default = "default_law")]
    governing_law: GoverningLaw,
    #[serde(default = "default_true")]
    bilateral: bool,
}

impl Default for MetaRecord {
    fn default() -> Self {
        MetaRecord {
            governing_law: default_law(),
            bilateral: true,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TermsRecord {
    #[serde(default)]
    threshold: Money,
    #[serde(default)]
    ia: Money,
    #[serde(default)]
    im: Money,
    #[serde(default)]
    mta: Money,
    ra: Money,
    #[serde(default = "default_ccy")]
    base_currency: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegimeRecord {
    default: String,
    #[serde(default)]
    overrides: BTreeMap<String, String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct HaircutsSection {
    #[serde(default)]
    matrix: BTreeMap<String, f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct EligibilitySection {
    #[serde(rename = "scheduleA", default)]
    schedule_a: Vec<ClassBucket>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassBucket {
    class: String,
    bucket: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CapMode {
    Absolute,
    #[serde(rename = "fraction_of_U")]
    FractionOfU,
}

/// A bare number is read as a fraction of U.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum CapRecord {
    Tagged { mode: CapMode, value: f64 },
    Bare(f64),
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CapsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cash_cap: Option<CapRecord>,
    #[serde(default)]
    issuer_cap: BTreeMap<String, CapRecord>,
    #[serde(default)]
    class_cap: BTreeMap<String, CapRecord>,
    #[serde(default)]
    currency_cap: BTreeMap<String, CapRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    global_cap: Option<CapRecord>,
}

/// Either an amount in currency units or a string such as `"25bps"`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum BufferRecord {
    Amount(f64),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct WindowSection {
    buffer: BufferRecord,
    #[serde(default)]
    hard_cap: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ExposureSection {
    #[serde(rename = "E")]
    e: Money,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenariosSection {
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    weights: Vec<f64>,
    #[serde(rename = "L", default)]
    loss_matrix: Vec<Vec<f64>>,
}

impl Default for ScenariosSection {
    fn default() -> Self {
        ScenariosSection {
            alpha: default_alpha(),
            weights: Vec::new(),
            loss_matrix: Vec::new(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ItemRecord {
    id: String,
    class: String,
    issuer: String,
    bucket: String,
    currency: String,
    icad: String,
    price: f64,
    unit: Money,
    #[serde(default)]
    current_lots: u32,
    max_lots: u32,
    #[serde(default)]
    is_cash: bool,
    #[serde(default = "default_true")]
    eligible: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CostsSection {
    /// item id → carry per lot per day.
    #[serde(default)]
    carry: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightsRecord {
    lambda: f64,
    mu: f64,
    gamma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProvenanceRecord {
    ops_move_cost: f64,
    horizon_days: u32,
    cvar_price_per_mm_day: f64,
    funding_bps_annual: f64,
    #[serde(default = "default_day_count")]
    day_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct AuditSection {
    #[serde(default)]
    flags: Vec<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SolverSection {
    #[serde(default)]
    limits: SolverLimits,
}

fn default_law() -> GoverningLaw {
    GoverningLaw::NewYork
}
fn default_true() -> bool {
    true
}
fn default_ccy() -> String {
    "USD".into()
}
fn default_alpha() -> f64 {
    0.90
}
fn default_day_count() -> u32 {
    360
}

/// Parses and validates a case file.
pub fn parse_case(document: &[u8]) -> Result<CaseInput> {
    let mut de = serde_json::Deserializer::from_slice(document);
    let file: CaseFile = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let case = from_file(file)?;
    case.validate()?;
    Ok(case)
}

/// Canonical bytes of a case (sorted keys); `parse_case` inverts it exactly.
pub fn serialize_case(case: &CaseInput) -> Result<Vec<u8>> {
    to_canonical_bytes(&to_file(case))
}

fn cap_from(rec: &CapRecord) -> CapLimit {
    match *rec {
        CapRecord::Bare(f)
        | CapRecord::Tagged {
            mode: CapMode::FractionOfU,
            value: f,
        } => CapLimit::FractionOfU(Fraction::from_f64(f)),
        CapRecord::Tagged {
            mode: CapMode::Absolute,
            value,
        } => CapLimit::Absolute(Money::from_units(value)),
    }
}

fn cap_to(cap: &CapLimit) -> CapRecord {
    match *cap {
        CapLimit::Absolute(m) => CapRecord::Tagged {
            mode: CapMode::Absolute,
            value: m.units(),
        },
        CapLimit::FractionOfU(f) => CapRecord::Tagged {
            mode: CapMode::FractionOfU,
            value: f.to_f64(),
        },
    }
}

fn parse_buffer(rec: &BufferRecord) -> Result<BufferSpec> {
    match rec {
        BufferRecord::Amount(a) => Ok(BufferSpec::Absolute(Money::from_units(*a))),
        BufferRecord::Text(s) => {
            let t = s.trim();
            let bad = || Error::Parse {
                path: "window.buffer".into(),
                message: format!("cannot read buffer `{s}` (expected an amount or e.g. \"25bps\")"),
            };
            if let Some(num) = t.strip_suffix("bps") {
                num.trim().parse::<f64>().map(BufferSpec::Bps).map_err(|_| bad())
            } else {
                t.parse::<f64>()
                    .map(|a| BufferSpec::Absolute(Money::from_units(a)))
                    .map_err(|_| bad())
            }
        }
    }
}

fn from_file(f: CaseFile) -> Result<CaseInput> {
    let terms = CsaTerms {
        threshold: f.csa.terms.threshold,
        independent_amount: f.csa.terms.ia,
        initial_margin: f.csa.terms.im,
        mta: f.csa.terms.mta,
        rounding: f.csa.terms.ra,
        base_currency: f.csa.terms.base_currency,
        governing_law: f.csa.meta.governing_law,
        bilateral: f.csa.meta.bilateral,
    };
    let mut overrides = BTreeMap::new();
    for (bucket, r) in &f.csa.regime.overrides {
        overrides.insert(bucket.clone(), r.parse::<Regime>()?);
    }
    let regime = RegimeSelector {
        default_regime: f.csa.regime.default.parse()?,
        per_bucket_overrides: overrides,
    };
    let mut haircuts = HaircutMatrix::default();
    for (k, v) in &f.haircuts.matrix {
        haircuts.entries.insert(HaircutKey::decode(k)?, *v);
    }
    let eligibility = Eligibility {
        schedule_a: f
            .eligibility
            .schedule_a
            .into_iter()
            .map(|cb| (cb.class, cb.bucket))
            .collect(),
    };
    let caps = Caps {
        cash_cap: f.caps.cash_cap.as_ref().map(cap_from),
        issuer_cap: f.caps.issuer_cap.iter().map(|(k, v)| (k.clone(), cap_from(v))).collect(),
        class_cap: f.caps.class_cap.iter().map(|(k, v)| (k.clone(), cap_from(v))).collect(),
        currency_cap: f.caps.currency_cap.iter().map(|(k, v)| (k.clone(), cap_from(v))).collect(),
        global_cap: f.caps.global_cap.as_ref().map(cap_from),
    };
    let window = Window {
        buffer: parse_buffer(&f.window.buffer)?,
        hard_cap_enabled: f.window.hard_cap,
    };
    for id in f.costs.carry.keys() {
        if !f.inventory.iter().any(|i| &i.id == id) {
            return Err(Error::Validation(format!("costs.carry names unknown item `{id}`")));
        }
    }
    let inventory = f
        .inventory
        .into_iter()
        .map(|r| InventoryItem {
            carry_cost: f.costs.carry.get(&r.id).copied().unwrap_or(0.0),
            id: r.id,
            asset_class: r.class,
            issuer: r.issuer,
            bucket: r.bucket,
            currency: r.currency,
            icad: r.icad,
            price: r.price,
            unit: r.unit,
            current_lots: r.current_lots,
            max_lots: r.max_lots,
            is_cash: r.is_cash,
            eligible: r.eligible,
        })
        .collect();
    let scenarios = ScenarioSet {
        loss_matrix: f.scenarios.loss_matrix,
        raw_weights: f.scenarios.weights,
        alpha: f.scenarios.alpha,
    };
    let provenance = f.weights_provenance.map(|p| WeightsProvenance {
        ops_move_cost: p.ops_move_cost,
        horizon_days: p.horizon_days,
        cvar_price_per_mm_day: p.cvar_price_per_mm_day,
        funding_bps_annual: p.funding_bps_annual,
        day_count: p.day_count,
        content_hash: p.hash.unwrap_or_default(),
        timestamp: p.timestamp,
    });
    let weights = match (f.weights, provenance) {
        (Some(w), prov) => {
            let prov = prov.map(|p| calibrate_weights(&p).map(|c| c.provenance.unwrap()));
            Weights {
                lambda_movement: w.lambda,
                mu_cvar: w.mu,
                gamma_overshoot: w.gamma,
                calibrated: false,
                provenance: prov.transpose()?,
            }
        }
        (None, Some(p)) => calibrate_weights(&p)?,
        (None, None) => Weights::zero(),
    };
    Ok(CaseInput {
        terms,
        regime,
        haircuts,
        eligibility,
        caps,
        window,
        exposure: f.exposure.e,
        exposure_timestamp: f.exposure.timestamp,
        inventory,
        scenarios,
        weights,
        solver_limits: f.solver.limits,
        audit_flags: f.audit.flags.into_iter().collect(),
        span_citations: f.csa.span_citations,
    })
}

fn to_file(c: &CaseInput) -> CaseFile {
    let buffer = match c.window.buffer {
        BufferSpec::Absolute(m) => BufferRecord::Amount(m.units()),
        BufferSpec::Bps(b) => BufferRecord::Text(format!("{b}bps")),
    };
    CaseFile {
        csa: CsaSection {
            meta: MetaRecord {
                governing_law: c.terms.governing_law,
                bilateral: c.terms.bilateral,
            },
            terms: TermsRecord {
                threshold: c.terms.threshold,
                ia: c.terms.independent_amount,
                im: c.terms.initial_margin,
                mta: c.terms.mta,
                ra: c.terms.rounding,
                base_currency: c.terms.base_currency.clone(),
            },
            regime: RegimeRecord {
                default: c.regime.default_regime.to_string(),
                overrides: c
                    .regime
                    .per_bucket_overrides
                    .iter()
                    .map(|(k, v)| (k.clone(), v.to_string()))
                    .collect(),
            },
            span_citations: c.span_citations.clone(),
        },
        haircuts: HaircutsSection {
            matrix: c.haircuts.entries.iter().map(|(k, v)| (k.encode(), *v)).collect(),
        },
        eligibility: EligibilitySection {
            schedule_a: c
                .eligibility
                .schedule_a
                .iter()
                .map(|(class, bucket)| ClassBucket {
                    class: class.clone(),
                    bucket: bucket.clone(),
                })
                .collect(),
        },
        caps: CapsSection {
            cash_cap: c.caps.cash_cap.as_ref().map(cap_to),
            issuer_cap: c.caps.issuer_cap.iter().map(|(k, v)| (k.clone(), cap_to(v))).collect(),
            class_cap: c.caps.class_cap.iter().map(|(k, v)| (k.clone(), cap_to(v))).collect(),
            currency_cap: c.caps.currency_cap.iter().map(|(k, v)| (k.clone(), cap_to(v))).collect(),
            global_cap: c.caps.global_cap.as_ref().map(cap_to),
        },
        window: WindowSection {
            buffer,
            hard_cap: c.window.hard_cap_enabled,
        },
        exposure: ExposureSection {
            e: c.exposure,
            timestamp: c.exposure_timestamp.clone(),
        },
        scenarios: ScenariosSection {
            alpha: c.scenarios.alpha,
            weights: c.scenarios.raw_weights.clone(),
            loss_matrix: c.scenarios.loss_matrix.clone(),
        },
        inventory: c
            .inventory
            .iter()
            .map(|i| ItemRecord {
                id: i.id.clone(),
                class: i.asset_class.clone(),
                issuer: i.issuer.clone(),
                bucket: i.bucket.clone(),
                currency: i.currency.clone(),
                icad: i.icad.clone(),
                price: i.price,
                unit: i.unit,
                current_lots: i.current_lots,
                max_lots: i.max_lots,
                is_cash: i.is_cash,
                eligible: i.eligible,
            })
            .collect(),
        costs: CostsSection {
            carry: c
                .inventory
                .iter()
                .map(|i| (i.id.clone(), i.carry_cost))
                .collect(),
        },
        weights: (!c.weights.calibrated).then(|| WeightsRecord {
            lambda: c.weights.lambda_movement,
            mu: c.weights.mu_cvar,
            gamma: c.weights.gamma_overshoot,
        }),
        weights_provenance: c.weights.provenance.as_ref().map(|p| ProvenanceRecord {
            ops_move_cost: p.ops_move_cost,
            horizon_days: p.horizon_days,
            cvar_price_per_mm_day: p.cvar_price_per_mm_day,
            funding_bps_annual: p.funding_bps_annual,
            day_count: p.day_count,
            hash: Some(p.content_hash.clone()),
            timestamp: p.timestamp.clone(),
        }),
        audit: AuditSection {
            flags: c.audit_flags.iter().cloned().collect(),
        },
        solver: SolverSection {
            limits: c.solver_limits.clone(),
        },
    }
}
