use serde::Serialize;

use super::{HaircutMatrix, InventoryItem, Regime, RegimeSelector};
use crate::error::{Error, Result};
use crate::money::Money;

/// One line of the valuation audit: instrument → ICAD/bucket/regime → haircut → v_i.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuationRow {
    pub instrument: String,
    pub icad: String,
    pub bucket: String,
    pub regime: Regime,
    pub haircut_pct: f64,
    pub lot_value: Money,
}

pub fn resolve_regime(item: &InventoryItem, regime: &RegimeSelector) -> Regime {
    regime.regime_for(&item.bucket)
}

/// After-haircut value of one lot, rounded to the cent.
///
/// Cash without a matrix entry is valued at a zero haircut.
pub fn lot_valuation(
    item: &InventoryItem,
    haircuts: &HaircutMatrix,
    regime: &RegimeSelector,
) -> Result<ValuationRow> {
    let r = resolve_regime(item, regime);
    let haircut = match haircuts.get(&item.icad, &item.bucket, r) {
        Some(h) => h,
        None if item.is_cash => 0.0,
        None => {
            return Err(Error::Ineligible {
                item: item.id.clone(),
                icad: item.icad.clone(),
                bucket: item.bucket.clone(),
                regime: r.to_string(),
            })
        }
    };
    let cents = item.unit.cents() as f64 * item.price * (1.0 - haircut);
    Ok(ValuationRow {
        instrument: item.id.clone(),
        icad: item.icad.clone(),
        bucket: item.bucket.clone(),
        regime: r,
        haircut_pct: haircut,
        lot_value: Money(cents.round() as i64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bond(unit: f64, price: f64) -> InventoryItem {
        InventoryItem {
            id: "B1".into(),
            asset_class: "Govt".into(),
            issuer: "UST".into(),
            bucket: "govt_5y".into(),
            currency: "USD".into(),
            icad: "US-GOVT".into(),
            price,
            unit: Money::from_units(unit),
            current_lots: 0,
            max_lots: 10,
            carry_cost: 0.5,
            is_cash: false,
            eligible: true,
        }
    }

    fn matrix() -> HaircutMatrix {
        let mut m = HaircutMatrix::default();
        m.insert("US-GOVT", "govt_5y", Regime::Sp, 0.04);
        m.insert("US-GOVT", "govt_5y", Regime::M1, 0.05);
        m.insert("US-GOVT", "govt_5y", Regime::M2, 0.08);
        m
    }

    #[test]
    fn cash_lot_without_entry_has_no_haircut() {
        let mut cash = bond(10_000.0, 1.0);
        cash.is_cash = true;
        cash.icad = "CASH".into();
        let row = lot_valuation(&cash, &matrix(), &RegimeSelector::uniform(Regime::M1)).unwrap();
        assert_eq!(row.lot_value, Money::from_units(10_000.0));
        assert_eq!(row.haircut_pct, 0.0);
    }

    #[test]
    fn bond_lot_m1_and_m2() {
        let b = bond(10_000.0, 1.0);
        let m1 = lot_valuation(&b, &matrix(), &RegimeSelector::uniform(Regime::M1)).unwrap();
        assert_eq!(m1.lot_value, Money::from_units(9_500.0));
        let m2 = lot_valuation(&b, &matrix(), &RegimeSelector::uniform(Regime::M2)).unwrap();
        assert_eq!(m2.lot_value, Money::from_units(9_200.0));
        assert_eq!(
            (m2.icad.as_str(), m2.bucket.as_str(), m2.regime, m2.haircut_pct),
            ("US-GOVT", "govt_5y", Regime::M2, 0.08)
        );
    }

    #[test]
    fn bucket_override_wins_over_default() {
        let b = bond(10_000.0, 1.0);
        let mut sel = RegimeSelector::uniform(Regime::M1);
        sel.per_bucket_overrides.insert("govt_5y".into(), Regime::Sp);
        let row = lot_valuation(&b, &matrix(), &sel).unwrap();
        assert_eq!(row.regime, Regime::Sp);
        assert_eq!(row.lot_value, Money::from_units(9_600.0));
    }

    #[test]
    fn missing_entry_names_the_key() {
        let mut b = bond(10_000.0, 1.0);
        b.bucket = "corp_a".into();
        let err = lot_valuation(&b, &matrix(), &RegimeSelector::uniform(Regime::M1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("US-GOVT") && msg.contains("corp_a") && msg.contains("m1"), "{msg}");
    }

    proptest! {
        #[test]
        fn higher_haircut_means_strictly_lower_value(
            unit in 1_000u32..5_000_000,
            price_bp in 5_000u32..15_000,
            h1 in 0u32..9_999,
            dh in 1u32..100,
        ) {
            let b = bond(unit as f64, price_bp as f64 / 10_000.0);
            let h2 = (h1 + dh).min(9_999);
            prop_assume!(h2 > h1);
            let mut m = HaircutMatrix::default();
            m.insert("US-GOVT", "govt_5y", Regime::M1, h1 as f64 / 10_000.0);
            m.insert("US-GOVT", "govt_5y", Regime::M2, h2 as f64 / 10_000.0);
            let lo = lot_valuation(&b, &m, &RegimeSelector::uniform(Regime::M1)).unwrap();
            let hi = lot_valuation(&b, &m, &RegimeSelector::uniform(Regime::M2)).unwrap();
            prop_assert!(hi.lot_value < lo.lot_value);
        }
    }
}
