//! Scalar semiring arithmetic.
//!
//! A semiring fixes a carrier `K` together with an addition ⊕ (commutative
//! monoid with identity 0̃), a multiplication ⊗ (monoid with identity 1̃)
//! that distributes over ⊕, and an absorbing 0̃ (`a ⊗ 0̃ = 0̃`). The four
//! carriers supported here:
//!
//! | tag       | K              | ⊕   | ⊗   | 0̃  | 1̃ |
//! |-----------|----------------|-----|-----|----|---|
//! | `boolean` | {0, 1}         | ∨   | ∧   | 0  | 1 |
//! | `minmax`  | ℝ≤0 ∪ {⊥}      | max | min | ⊥  | 0 |
//! | `maxplus` | ℝ≤0 ∪ {⊥}      | max | +   | ⊥  | 0 |
//! | `minplus` | ℝ≥0 ∪ {∞}      | min | +   | ∞  | 0 |
//!
//! The absorbing element is an explicit [`Weight::Bot`] symbol rather than a
//! floating infinity, so annihilation and the identity laws hold exactly. Its
//! numeric reading is −∞ for the max-based semirings and +∞ for `minplus`.

use core::fmt;
use core::str::FromStr;

/// Selects the active semiring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SemiringTag {
    Boolean,
    MinMax,
    MaxPlus,
    MinPlus,
}

/// A scalar in the active carrier.
///
/// `Bot` is the absorbing additive identity 0̃ of the non-boolean semirings;
/// the boolean 0̃ is the ordinary number 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    Bot,
    Num(f64),
}

impl Weight {
    pub fn is_bot(self) -> bool {
        matches!(self, Weight::Bot)
    }

    /// The finite value, if any.
    pub fn num(self) -> Option<f64> {
        match self {
            Weight::Bot => None,
            Weight::Num(v) => Some(v),
        }
    }
}

/// A value lies outside the active semiring's carrier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainError {
    pub tag: SemiringTag,
    pub value: Weight,
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Weight::Bot => write!(f, "bottom is not in the {} carrier", self.tag),
            Weight::Num(v) => write!(f, "{v} is not in the {} carrier", self.tag),
        }
    }
}

impl core::error::Error for DomainError {}

impl SemiringTag {
    pub const ALL: [SemiringTag; 4] = [
        SemiringTag::Boolean,
        SemiringTag::MinMax,
        SemiringTag::MaxPlus,
        SemiringTag::MinPlus,
    ];

    /// Additive identity 0̃.
    pub fn zero(self) -> Weight {
        match self {
            SemiringTag::Boolean => Weight::Num(0.0),
            _ => Weight::Bot,
        }
    }

    /// Multiplicative identity 1̃.
    pub fn one(self) -> Weight {
        match self {
            SemiringTag::Boolean => Weight::Num(1.0),
            _ => Weight::Num(0.0),
        }
    }

    /// Whether `w` lies in the carrier.
    pub fn contains(self, w: Weight) -> bool {
        match (self, w) {
            (SemiringTag::Boolean, Weight::Num(v)) => v == 0.0 || v == 1.0,
            (SemiringTag::Boolean, Weight::Bot) => false,
            (SemiringTag::MinMax | SemiringTag::MaxPlus, Weight::Num(v)) => {
                v.is_finite() && v <= 0.0
            }
            (SemiringTag::MinPlus, Weight::Num(v)) => v.is_finite() && v >= 0.0,
            (_, Weight::Bot) => true,
        }
    }

    /// Checked constructor for a carrier value.
    pub fn value(self, v: f64) -> Result<Weight, DomainError> {
        let w = Weight::Num(v);
        if self.contains(w) {
            Ok(w)
        } else {
            Err(DomainError { tag: self, value: w })
        }
    }

    /// Semiring addition `a ⊕ b`.
    pub fn add(self, a: Weight, b: Weight) -> Weight {
        debug_assert!(self.contains(a) && self.contains(b), "operand outside carrier");
        match (a, b) {
            (Weight::Bot, x) | (x, Weight::Bot) => x,
            (Weight::Num(x), Weight::Num(y)) => Weight::Num(match self {
                SemiringTag::Boolean | SemiringTag::MinMax | SemiringTag::MaxPlus => x.max(y),
                SemiringTag::MinPlus => x.min(y),
            }),
        }
    }

    /// Semiring multiplication `a ⊗ b`.
    pub fn mul(self, a: Weight, b: Weight) -> Weight {
        debug_assert!(self.contains(a) && self.contains(b), "operand outside carrier");
        match (a, b) {
            (Weight::Bot, _) | (_, Weight::Bot) => Weight::Bot,
            (Weight::Num(x), Weight::Num(y)) => Weight::Num(match self {
                SemiringTag::Boolean | SemiringTag::MinMax => x.min(y),
                SemiringTag::MaxPlus | SemiringTag::MinPlus => x + y,
            }),
        }
    }

    /// Numeric reading of a weight, with `Bot` mapped to the signed infinity
    /// it stands for. Intended for reporting, not for arithmetic.
    pub fn weight_to_f64(self, w: Weight) -> f64 {
        match w {
            Weight::Num(v) => v,
            Weight::Bot => match self {
                SemiringTag::MinPlus => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SemiringTag::Boolean => "boolean",
            SemiringTag::MinMax => "minmax",
            SemiringTag::MaxPlus => "maxplus",
            SemiringTag::MinPlus => "minplus",
        }
    }
}

impl fmt::Display for SemiringTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SemiringTag {
    type Err = UnknownSemiring;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "boolean" => Ok(SemiringTag::Boolean),
            "minmax" => Ok(SemiringTag::MinMax),
            "maxplus" => Ok(SemiringTag::MaxPlus),
            "minplus" => Ok(SemiringTag::MinPlus),
            _ => Err(UnknownSemiring),
        }
    }
}

/// Unrecognized semiring name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnknownSemiring;

impl fmt::Display for UnknownSemiring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("expected one of: boolean, minmax, maxplus, minplus")
    }
}

impl core::error::Error for UnknownSemiring {}

#[cfg(test)]
mod tests {
    use super::*;

    const MP: SemiringTag = SemiringTag::MaxPlus;
    const MM: SemiringTag = SemiringTag::MinMax;
    const B: SemiringTag = SemiringTag::Boolean;

    #[test]
    fn maxplus_add_is_max() {
        assert_eq!(MP.add(Weight::Num(-2.0), Weight::Num(-3.0)), Weight::Num(-2.0));
        assert_eq!(MP.add(Weight::Bot, Weight::Num(-5.0)), Weight::Num(-5.0));
    }

    #[test]
    fn boolean_add_is_or() {
        assert_eq!(B.add(Weight::Num(1.0), Weight::Num(0.0)), Weight::Num(1.0));
    }

    #[test]
    fn maxplus_mul_is_plus_with_annihilator() {
        assert_eq!(MP.mul(Weight::Num(-2.0), Weight::Num(-3.0)), Weight::Num(-5.0));
        assert_eq!(MP.mul(Weight::Bot, Weight::Num(-5.0)), Weight::Bot);
    }

    #[test]
    fn minmax_mul_is_min() {
        assert_eq!(MM.mul(Weight::Num(-2.0), Weight::Num(-3.0)), Weight::Num(-3.0));
    }

    #[test]
    fn carrier_checks() {
        assert!(MP.value(-1.5).is_ok());
        assert!(MP.value(0.5).is_err());
        assert!(SemiringTag::MinPlus.value(0.5).is_ok());
        assert!(SemiringTag::MinPlus.value(-0.5).is_err());
        assert!(B.value(1.0).is_ok());
        assert!(B.value(0.25).is_err());
        assert!(!B.contains(Weight::Bot));
    }

    #[test]
    fn identities() {
        for tag in SemiringTag::ALL {
            let a = if tag == SemiringTag::MinPlus { Weight::Num(2.0) } else { tag.one() };
            assert_eq!(tag.add(a, tag.zero()), a);
            assert_eq!(tag.mul(a, tag.one()), a);
            assert_eq!(tag.mul(a, tag.zero()), tag.zero());
        }
    }
}
