//! Exact money and fraction representations.
//!
//! Money is carried in integer minor units (cents). Fractions (cap shares,
//! haircuts used in exact comparisons) are carried in parts per billion so
//! that fraction-of-coverage constraints can be checked without rounding.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Minor units per currency unit.
pub const CENTS: i64 = 100;

/// Parts-per-billion denominator of [`Fraction`].
pub const PPB: i64 = 1_000_000_000;

/// An amount of money in integer cents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(pub i64);

impl Money {
    pub const ZERO: Money = Money(0);

    /// Rounds a currency-unit amount to the nearest cent.
    pub fn from_units(units: f64) -> Money {
        Money((units * CENTS as f64).round() as i64)
    }

    pub fn cents(self) -> i64 {
        self.0
    }

    pub fn units(self) -> f64 {
        self.0 as f64 / CENTS as f64
    }

    pub fn max(self, other: Money) -> Money {
        Money(self.0.max(other.0))
    }

    pub fn min(self, other: Money) -> Money {
        Money(self.0.min(other.0))
    }

    pub fn positive_part(self) -> Money {
        Money(self.0.max(0))
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / CENTS as u64, abs % CENTS as u64)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Mul<i64> for Money {
    type Output = Money;
    fn mul(self, rhs: i64) -> Money {
        Money(self.0 * rhs)
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.units())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Money, D::Error> {
        let units = f64::deserialize(d)?;
        if !units.is_finite() {
            return Err(serde::de::Error::custom("money must be finite"));
        }
        Ok(Money::from_units(units))
    }
}

/// A fraction in parts per billion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(pub i64);

impl Fraction {
    pub const ONE: Fraction = Fraction(PPB);

    pub fn from_f64(f: f64) -> Fraction {
        Fraction((f * PPB as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / PPB as f64
    }

    /// `self × amount`, exact when representable, otherwise rounded toward zero.
    pub fn of(self, amount: Money) -> Money {
        Money(((self.0 as i128 * amount.0 as i128) / PPB as i128) as i64)
    }

    /// `self × amount` in currency units without intermediate rounding.
    pub fn of_units(self, amount: Money) -> f64 {
        (self.0 as i128 * amount.0 as i128) as f64 / (PPB as f64 * CENTS as f64)
    }

    /// Exact test of `lhs ≤ self × total`.
    pub fn admits(self, lhs: Money, total: Money) -> bool {
        (lhs.0 as i128) * (PPB as i128) <= (self.0 as i128) * (total.0 as i128)
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Fraction, D::Error> {
        let f = f64::deserialize(d)?;
        if !f.is_finite() {
            return Err(serde::de::Error::custom("fraction must be finite"));
        }
        Ok(Fraction::from_f64(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn money_rounds_to_cents() {
        assert_eq!(Money::from_units(9500.0).cents(), 950_000);
        assert_eq!(Money::from_units(0.015).cents(), 2);
        assert_eq!(Money::from_units(-1.004).cents(), -100);
        assert_eq!(Money(-1234).to_string(), "-12.34");
    }

    #[test]
    fn fraction_admits_is_exact() {
        let f = Fraction::from_f64(0.2);
        assert!(f.admits(Money::from_units(11_400.0), Money::from_units(57_000.0)));
        assert!(!f.admits(Money::from_units(11_400.01), Money::from_units(57_000.0)));
        assert_eq!(f.of(Money::from_units(57_000.0)), Money::from_units(11_400.0));
    }
}
