//! Scalarized objective `J = BaseCost + λ·Movement + μ·CVaR + γ·Overshoot`
//! and weight calibration.

use serde::{Deserialize, Serialize};

use crate::canonical::canonical_hash;
use crate::data_model::{Weights, WeightsProvenance};
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::requirement::Allocation;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// Σ c_i x_i, currency per day.
    pub base_cost_abs: f64,
    pub movement_lots: u64,
    pub cvar_value: f64,
    /// (U − R_eff)₊ in currency units.
    pub overshoot_value: f64,
    pub lambda_movement: f64,
    pub mu_cvar: f64,
    pub gamma_overshoot: f64,
    /// Currency-per-day equivalent.
    pub j_total: f64,
}

/// CVaR_α of a discrete loss distribution.
///
/// Minimizes `τ + (1/(1−α)) Σ w_s (ℓ_s − τ)₊` exactly: the minimum is attained
/// at the α-quantile of the losses. Weights must be normalized. Returns zero
/// for an empty distribution.
pub fn cvar_of_losses<S: Scalar>(losses: &[S], weights: &[S], alpha: S) -> S {
    debug_assert_eq!(losses.len(), weights.len());
    if losses.is_empty() {
        return S::zero();
    }
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].partial_cmp(&losses[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = S::zero();
    let mut tau = losses[order[order.len() - 1]];
    for &s in &order {
        cum = cum + weights[s];
        if cum >= alpha {
            tau = losses[s];
            break;
        }
    }
    let tail: S = losses
        .iter()
        .zip(weights)
        .map(|(&l, &w)| w * (l - tau).max(S::zero()))
        .sum();
    tau + tail / (S::one() - alpha)
}

/// Per-scenario portfolio losses `Σ_i L[s,i] x_i`.
pub fn scenario_losses(p: &Problem, lots: &[u32]) -> Vec<f64> {
    (0..p.num_scenarios())
        .map(|s| {
            p.loss_row(s)
                .iter()
                .zip(lots)
                .map(|(l, &x)| l * x as f64)
                .sum()
        })
        .collect()
}

pub fn cvar(x: &Allocation, p: &Problem) -> f64 {
    cvar_of_losses(&scenario_losses(p, &x.lots), &p.scenario_weights, p.alpha)
}

pub fn base_cost(p: &Problem, lots: &[u32]) -> f64 {
    lots.iter().zip(&p.carry).map(|(&x, c)| c * x as f64).sum()
}

pub fn movement(p: &Problem, lots: &[u32]) -> u64 {
    lots.iter()
        .zip(&p.holdings)
        .map(|(&x, &h)| x.abs_diff(h) as u64)
        .sum()
}

pub fn overshoot(p: &Problem, lots: &[u32]) -> f64 {
    (p.coverage(lots) - p.r_eff).positive_part().units()
}

fn combine(p: &Problem, base: f64, mov: u64, cvar: f64, over: f64) -> f64 {
    base + p.lambda * mov as f64 + p.mu * cvar + p.gamma * over
}

/// Scalarized objective; bitwise equal to `breakdown(..).j_total`.
pub fn j_value(p: &Problem, lots: &[u32]) -> f64 {
    let cv = if p.mu == 0.0 {
        0.0
    } else {
        cvar_of_losses(&scenario_losses(p, lots), &p.scenario_weights, p.alpha)
    };
    combine(p, base_cost(p, lots), movement(p, lots), cv, overshoot(p, lots))
}

pub fn breakdown(x: &Allocation, p: &Problem) -> ObjectiveBreakdown {
    let base = base_cost(p, &x.lots);
    let mov = movement(p, &x.lots);
    let cv = cvar(x, p);
    let over = overshoot(p, &x.lots);
    // μ·CVaR enters J only when μ ≠ 0 so that 0·CVaR never perturbs J.
    let j = combine(p, base, mov, if p.mu == 0.0 { 0.0 } else { cv }, over);
    ObjectiveBreakdown {
        base_cost_abs: base,
        movement_lots: mov,
        cvar_value: cv,
        overshoot_value: over,
        lambda_movement: p.lambda * mov as f64,
        mu_cvar: p.mu * cv,
        gamma_overshoot: p.gamma * over,
        j_total: j,
    }
}

#[derive(Serialize)]
struct CalibrationInputs {
    ops_move_cost: f64,
    horizon_days: u32,
    cvar_price_per_mm_day: f64,
    funding_bps_annual: f64,
    day_count: u32,
}

/// Content hash over the calibration inputs.
pub fn provenance_hash(prov: &WeightsProvenance) -> Result<String> {
    canonical_hash(&CalibrationInputs {
        ops_move_cost: prov.ops_move_cost,
        horizon_days: prov.horizon_days,
        cvar_price_per_mm_day: prov.cvar_price_per_mm_day,
        funding_bps_annual: prov.funding_bps_annual,
        day_count: prov.day_count,
    })
}

/// λ = ops cost / horizon, μ = CVaR price per 1MM per day / 10⁶,
/// γ = funding bps / 10⁴ / day count.
pub fn calibrate_weights(prov: &WeightsProvenance) -> Result<Weights> {
    if prov.horizon_days == 0 {
        return Err(Error::Calibration("horizon_days must be positive".into()));
    }
    if prov.day_count == 0 {
        return Err(Error::Calibration("day_count must be positive".into()));
    }
    for (n, v) in [
        ("ops_move_cost", prov.ops_move_cost),
        ("cvar_price_per_mm_day", prov.cvar_price_per_mm_day),
        ("funding_bps_annual", prov.funding_bps_annual),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Calibration(format!("{n} must be finite and >= 0")));
        }
    }
    let mut provenance = prov.clone();
    provenance.content_hash = provenance_hash(prov)?;
    Ok(Weights {
        lambda_movement: prov.ops_move_cost / prov.horizon_days as f64,
        mu_cvar: prov.cvar_price_per_mm_day / 1_000_000.0,
        gamma_overshoot: prov.funding_bps_annual / 10_000.0 / prov.day_count as f64,
        calibrated: true,
        provenance: Some(provenance),
    })
}
