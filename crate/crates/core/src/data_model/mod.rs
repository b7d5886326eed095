//! Typed, validated view of a CSA-aware case file.
//!
//! The file schema lives in [`schema`]; this module holds the domain types the
//! rest of the crate works with. All types are immutable after validation.

mod schema;
mod valuation;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::{Fraction, Money};

pub use schema::{parse_case, serialize_case};
pub use valuation::{lot_valuation, resolve_regime, ValuationRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GoverningLaw {
    #[serde(rename = "NY")]
    NewYork,
    #[serde(rename = "English")]
    English,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsaTerms {
    pub threshold: Money,
    pub independent_amount: Money,
    pub initial_margin: Money,
    pub mta: Money,
    pub rounding: Money,
    pub base_currency: String,
    pub governing_law: GoverningLaw,
    pub bilateral: bool,
}

impl CsaTerms {
    /// Zero offsets, no MTA, USD base, NY law.
    pub fn with_rounding(rounding: Money) -> CsaTerms {
        CsaTerms {
            threshold: Money::ZERO,
            independent_amount: Money::ZERO,
            initial_margin: Money::ZERO,
            mta: Money::ZERO,
            rounding,
            base_currency: "USD".into(),
            governing_law: GoverningLaw::NewYork,
            bilateral: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounding <= Money::ZERO {
            return Err(Error::Validation("csa.terms.ra must be > 0".into()));
        }
        if self.mta < Money::ZERO {
            return Err(Error::Validation("csa.terms.mta must be >= 0".into()));
        }
        for (name, v) in [
            ("threshold", self.threshold),
            ("ia", self.independent_amount),
            ("im", self.initial_margin),
        ] {
            if v < Money::ZERO {
                return Err(Error::Validation(format!("csa.terms.{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Schedule A valuation column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Sp,
    M1,
    M2,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Sp, Regime::M1, Regime::M2];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Sp => "sp",
            Regime::M1 => "m1",
            Regime::M2 => "m2",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Regime> {
        match s {
            "sp" => Ok(Regime::Sp),
            "m1" => Ok(Regime::M1),
            "m2" => Ok(Regime::M2),
            other => Err(Error::Validation(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSelector {
    pub default_regime: Regime,
    pub per_bucket_overrides: BTreeMap<String, Regime>,
}

impl RegimeSelector {
    pub fn uniform(regime: Regime) -> RegimeSelector {
        RegimeSelector {
            default_regime: regime,
            per_bucket_overrides: BTreeMap::new(),
        }
    }

    pub fn regime_for(&self, bucket: &str) -> Regime {
        self.per_bucket_overrides
            .get(bucket)
            .copied()
            .unwrap_or(self.default_regime)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HaircutKey {
    pub icad: String,
    pub bucket: String,
    pub regime: Regime,
}

impl HaircutKey {
    pub fn new(icad: impl Into<String>, bucket: impl Into<String>, regime: Regime) -> Self {
        HaircutKey {
            icad: icad.into(),
            bucket: bucket.into(),
            regime,
        }
    }

    /// `ICAD|bucket|regime`
    pub fn encode(&self) -> String {
        format!("{}|{}|{}", self.icad, self.bucket, self.regime)
    }

    pub fn decode(s: &str) -> Result<HaircutKey> {
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 3 {
            return Err(Error::Validation(format!(
                "haircut key `{s}` must have the form ICAD|bucket|regime"
            )));
        }
        Ok(HaircutKey::new(parts[0], parts[1], parts[2].parse()?))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HaircutMatrix {
    pub entries: BTreeMap<HaircutKey, f64>,
}

impl HaircutMatrix {
    pub fn get(&self, icad: &str, bucket: &str, regime: Regime) -> Option<f64> {
        self.entries
            .get(&HaircutKey::new(icad, bucket, regime))
            .copied()
    }

    pub fn insert(&mut self, icad: &str, bucket: &str, regime: Regime, haircut: f64) {
        self.entries
            .insert(HaircutKey::new(icad, bucket, regime), haircut);
    }
}

/// A concentration limit, either in money or as a share of coverage U.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapLimit {
    Absolute(Money),
    FractionOfU(Fraction),
}

impl CapLimit {
    pub fn validate(&self, path: &str) -> Result<()> {
        match *self {
            CapLimit::Absolute(m) if m <= Money::ZERO => Err(Error::Validation(format!(
                "{path}: absolute cap must be > 0"
            ))),
            CapLimit::FractionOfU(f) if f.0 <= 0 || f > Fraction::ONE => Err(
                Error::Validation(format!("{path}: fraction cap must lie in (0, 1]")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Caps {
    pub cash_cap: Option<CapLimit>,
    pub issuer_cap: BTreeMap<String, CapLimit>,
    pub class_cap: BTreeMap<String, CapLimit>,
    pub currency_cap: BTreeMap<String, CapLimit>,
    /// Applied to every single inventory line (single-issue concentration).
    pub global_cap: Option<CapLimit>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BufferSpec {
    Absolute(Money),
    /// Basis points of the effective requirement.
    Bps(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub buffer: BufferSpec,
    pub hard_cap_enabled: bool,
}

impl Window {
    /// Resolves the buffer against the effective requirement.
    pub fn resolve(&self, r_eff: Money) -> Money {
        match self.buffer {
            BufferSpec::Absolute(m) => m,
            BufferSpec::Bps(bps) => Money((r_eff.cents() as f64 * bps / 10_000.0).round() as i64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InventoryItem {
    pub id: String,
    pub asset_class: String,
    pub issuer: String,
    pub bucket: String,
    pub currency: String,
    pub icad: String,
    /// Price per unit of face (1.0 = par).
    pub price: f64,
    /// Face per lot.
    pub unit: Money,
    pub current_lots: u32,
    pub max_lots: u32,
    /// Daily carry per lot, in currency units.
    pub carry_cost: f64,
    pub is_cash: bool,
    /// Per-item eligibility flag from the file.
    pub eligible: bool,
}

impl InventoryItem {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Validation(format!("inventory `{}`: {m}", self.id)));
        if self.id.is_empty() {
            return Err(Error::Validation("inventory item with empty id".into()));
        }
        if self.unit <= Money::ZERO {
            return fail("unit must be > 0");
        }
        if !(self.price.is_finite() && self.price > 0.0) {
            return fail("price must be finite and > 0");
        }
        if self.max_lots < self.current_lots {
            return fail("max_lots must be >= current_lots");
        }
        if !(self.carry_cost.is_finite() && self.carry_cost >= 0.0) {
            return fail("carry cost must be finite and >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    /// scenarios × items, loss per lot in currency units (negative = gain).
    pub loss_matrix: Vec<Vec<f64>>,
    /// Weights as given in the file.
    pub raw_weights: Vec<f64>,
    pub alpha: f64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.loss_matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss_matrix.is_empty()
    }

    pub fn raw_weight_sum(&self) -> f64 {
        self.raw_weights.iter().sum()
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        let s = self.raw_weight_sum();
        self.raw_weights.iter().map(|w| w / s).collect()
    }

    pub fn needs_renormalization(&self) -> bool {
        !self.is_empty() && (self.raw_weight_sum() - 1.0).abs() > 1e-12
    }
}

/// Operational inputs from which (λ, μ, γ) are calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsProvenance {
    pub ops_move_cost: f64,
    pub horizon_days: u32,
    pub cvar_price_per_mm_day: f64,
    pub funding_bps_annual: f64,
    pub day_count: u32,
    pub content_hash: String,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Weights {
    pub lambda_movement: f64,
    pub mu_cvar: f64,
    pub gamma_overshoot: f64,
    /// True when the triplet was derived from `provenance` rather than given.
    pub calibrated: bool,
    pub provenance: Option<WeightsProvenance>,
}

impl Weights {
    pub fn new(lambda: f64, mu: f64, gamma: f64) -> Weights {
        Weights {
            lambda_movement: lambda,
            mu_cvar: mu,
            gamma_overshoot: gamma,
            calibrated: false,
            provenance: None,
        }
    }

    pub fn zero() -> Weights {
        Weights::new(0.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in [
            ("lambda", self.lambda_movement),
            ("mu", self.mu_cvar),
            ("gamma", self.gamma_overshoot),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("weights.{n} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Eligibility {
    /// Eligible (class, bucket) pairs. Empty means no schedule restriction.
    pub schedule_a: BTreeSet<(String, String)>,
}

impl Eligibility {
    pub fn admits(&self, class: &str, bucket: &str) -> bool {
        self.schedule_a.is_empty()
            || self
                .schedule_a
                .contains(&(class.to_string(), bucket.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverLimits {
    pub sa_iterations: u64,
    pub plateau_window: u64,
    pub plateau_eps: f64,
    pub n_max: usize,
    pub k_max: usize,
    pub depth_p: usize,
    pub wall_seconds: f64,
    pub seed: u64,
    pub shots: usize,
    /// Angle-search energy evaluations per jump, over all layers.
    pub angle_budget: usize,
    pub trust_radius: u32,
    pub edge_eps: f64,
    pub must_jump: bool,
    pub jumps_enabled: bool,
    /// Run the exact minimal-buffer search in addition to the greedy one.
    pub exact_bstar: bool,
}

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits {
            sa_iterations: 2_000,
            plateau_window: 200,
            plateau_eps: 0.003,
            n_max: 12,
            k_max: 3,
            depth_p: 2,
            wall_seconds: 60.0,
            seed: 0,
            shots: 512,
            angle_budget: 200,
            trust_radius: 3,
            edge_eps: 0.05,
            must_jump: true,
            jumps_enabled: true,
            exact_bstar: true,
        }
    }
}

impl SolverLimits {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Validation(format!("solver.limits.{m}")));
        if !(1..=16).contains(&self.n_max) {
            return fail("n_max must lie in [1, 16]");
        }
        if !(2..=4).contains(&self.k_max) {
            return fail("k_max must lie in [2, 4]");
        }
        if self.depth_p < 1 {
            return fail("depth_p must be >= 1");
        }
        if !(self.plateau_eps.is_finite() && self.plateau_eps >= 0.0) {
            return fail("plateau_eps must be >= 0");
        }
        if self.plateau_window < 1 {
            return fail("plateau_window must be >= 1");
        }
        if !(self.wall_seconds >= 0.0) {
            return fail("wall_seconds must be >= 0");
        }
        if self.shots < 1 {
            return fail("shots must be >= 1");
        }
        if self.angle_budget < 1 {
            return fail("angle_budget must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.edge_eps) {
            return fail("edge_eps must lie in [0, 1]");
        }
        Ok(())
    }
}

/// The full normalized case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseInput {
    pub terms: CsaTerms,
    pub regime: RegimeSelector,
    pub haircuts: HaircutMatrix,
    pub eligibility: Eligibility,
    pub caps: Caps,
    pub window: Window,
    pub exposure: Money,
    pub exposure_timestamp: Option<String>,
    pub inventory: Vec<InventoryItem>,
    pub scenarios: ScenarioSet,
    pub weights: Weights,
    pub solver_limits: SolverLimits,
    pub audit_flags: BTreeSet<String>,
    /// Passed through untouched from the file.
    pub span_citations: Vec<serde_json::Value>,
}

impl CaseInput {
    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<()> {
        self.terms.validate()?;
        if self.inventory.is_empty() {
            return Err(Error::Validation("inventory must be non-empty".into()));
        }
        let mut ids = BTreeSet::new();
        for item in &self.inventory {
            item.validate()?;
            if !ids.insert(item.id.as_str()) {
                return Err(Error::Validation(format!("duplicate inventory id `{}`", item.id)));
            }
        }
        let buckets: BTreeSet<&str> = self.inventory.iter().map(|i| i.bucket.as_str()).collect();
        for b in self.regime.per_bucket_overrides.keys() {
            if !buckets.contains(b.as_str()) {
                return Err(Error::Validation(format!(
                    "csa.regime override for unknown bucket `{b}`"
                )));
            }
        }
        for (k, h) in &self.haircuts.entries {
            if !(h.is_finite() && (0.0..1.0).contains(h)) {
                return Err(Error::Validation(format!(
                    "haircut `{}` = {h} must lie in [0, 1)",
                    k.encode()
                )));
            }
        }
        if let Some(c) = &self.caps.cash_cap {
            c.validate("caps.cash_cap")?;
        }
        if let Some(c) = &self.caps.global_cap {
            c.validate("caps.global_cap")?;
        }
        for (name, map) in [
            ("issuer_cap", &self.caps.issuer_cap),
            ("class_cap", &self.caps.class_cap),
            ("currency_cap", &self.caps.currency_cap),
        ] {
            for (k, c) in map {
                c.validate(&format!("caps.{name}.{k}"))?;
            }
        }
        match self.window.buffer {
            BufferSpec::Absolute(m) if m < Money::ZERO => {
                return Err(Error::Validation("window.buffer must be >= 0".into()))
            }
            BufferSpec::Bps(b) if !(b.is_finite() && b >= 0.0) => {
                return Err(Error::Validation("window.buffer bps must be >= 0".into()))
            }
            _ => {}
        }
        let s = &self.scenarios;
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            return Err(Error::Validation("scenarios.alpha must lie in (0, 1)".into()));
        }
        if s.raw_weights.len() != s.loss_matrix.len() {
            return Err(Error::Validation(format!(
                "scenarios: {} weights for {} loss rows",
                s.raw_weights.len(),
                s.loss_matrix.len()
            )));
        }
        for (r, row) in s.loss_matrix.iter().enumerate() {
            if row.len() != self.inventory.len() {
                return Err(Error::Validation(format!(
                    "scenarios.L row {r} has {} columns, inventory has {} items",
                    row.len(),
                    self.inventory.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("scenarios.L row {r} is not finite")));
            }
        }
        if s.raw_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Validation("scenario weights must be finite and >= 0".into()));
        }
        if !s.is_empty() && s.raw_weight_sum() <= 0.0 {
            return Err(Error::Validation("scenario weights sum to zero".into()));
        }
        self.weights.validate()?;
        self.solver_limits.validate()?;
        Ok(())
    }

    /// Non-fatal observations recorded at load time.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.scenarios.is_empty() {
            w.push("no_scenarios: CVaR evaluates to 0".to_string());
        } else if self.scenarios.needs_renormalization() {
            w.push(format!(
                "scenario weights renormalized: raw sum {} rescaled to 1",
                self.scenarios.raw_weight_sum()
            ));
        }
        for item in &self.inventory {
            if let Err(e) = lot_valuation(item, &self.haircuts, &self.regime) {
                if item.eligible && self.eligibility.admits(&item.asset_class, &item.bucket) {
                    w.push(format!("{e}; item excluded"));
                }
            }
        }
        w
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.inventory.iter().position(|i| i.id == id)
    }
}
