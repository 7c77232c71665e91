//! Exact ordered-field arithmetic.
//!
//! [`Scalar`] is an exact rational, [`ExtScalar`] adds the two infinities used
//! for variable bounds, [`InfScalar`] is the first-order infinitesimal
//! extension `a + b·δ` used for one-sided slope queries, and the ε-polynomials
//! in [`eps`] carry the symbolic perturbation used by generic ray shooting.

mod eps;
mod scalar;

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eps::{cmp_eps, cmp_ratio, EpsPoint, EpsPoly, EpsRatio};
pub use scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("indeterminate sum of +inf and -inf")]
    IndeterminateSum,
    #[error("invalid rational literal `{0}`")]
    ParseRational(String),
}

/// A rational extended with `-inf` and `+inf`.
///
/// Variant order gives the total order `NegInf < Finite(_) < PosInf`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtScalar {
    NegInf,
    Finite(Scalar),
    PosInf,
}

impl ExtScalar {
    pub fn finite(&self) -> Option<&Scalar> {
        match self {
            ExtScalar::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtScalar::Finite(_))
    }

    /// Sum; `+inf + -inf` has no value and is reported as an error.
    pub fn checked_add(&self, rhs: &ExtScalar) -> Result<ExtScalar, NumericError> {
        use ExtScalar::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => Ok(Finite(a + b)),
            (PosInf, NegInf) | (NegInf, PosInf) => Err(NumericError::IndeterminateSum),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
        }
    }

    pub fn neg(&self) -> ExtScalar {
        match self {
            ExtScalar::NegInf => ExtScalar::PosInf,
            ExtScalar::PosInf => ExtScalar::NegInf,
            ExtScalar::Finite(v) => ExtScalar::Finite(-v),
        }
    }

    /// Multiplication by a finite scalar; the sign of `k` decides where an
    /// infinity lands. `0 · inf` is taken as 0.
    pub fn scale(&self, k: &Scalar) -> ExtScalar {
        match (self, k.signum()) {
            (_, Ordering::Equal) => ExtScalar::Finite(Scalar::zero()),
            (ExtScalar::Finite(v), _) => ExtScalar::Finite(v * k),
            (inf, Ordering::Greater) => inf.clone(),
            (inf, Ordering::Less) => inf.neg(),
        }
    }
}

impl From<Scalar> for ExtScalar {
    fn from(v: Scalar) -> Self {
        ExtScalar::Finite(v)
    }
}

impl fmt::Display for ExtScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtScalar::NegInf => f.write_str("-inf"),
            ExtScalar::PosInf => f.write_str("+inf"),
            ExtScalar::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for ExtScalar {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExtScalar {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        match s.as_str() {
            "-inf" => Ok(ExtScalar::NegInf),
            "+inf" | "inf" => Ok(ExtScalar::PosInf),
            other => other
                .parse()
                .map(ExtScalar::Finite)
                .map_err(serde::de::Error::custom),
        }
    }
}

/// `value + slope·δ` for a positive infinitesimal δ.
///
/// The derived ordering compares `value` first and `slope` second, which is
/// exactly the order of the field extension.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct InfScalar {
    pub value: Scalar,
    pub slope: Scalar,
}

impl InfScalar {
    pub fn new(value: Scalar, slope: Scalar) -> Self {
        InfScalar { value, slope }
    }

    pub fn constant(value: Scalar) -> Self {
        InfScalar { value, slope: Scalar::zero() }
    }

    pub fn zero() -> Self {
        InfScalar::default()
    }

    pub fn is_negative(&self) -> bool {
        self < &InfScalar::zero()
    }

    pub fn scale(&self, k: &Scalar) -> InfScalar {
        InfScalar { value: &self.value * k, slope: &self.slope * k }
    }

    pub fn div_scalar(&self, k: &Scalar) -> Result<InfScalar, NumericError> {
        let inv = Scalar::one().checked_div(k)?;
        Ok(self.scale(&inv))
    }

    /// `c + g·self` for scalars `c`, `g`.
    pub fn affine(&self, intercept: &Scalar, gain: &Scalar) -> InfScalar {
        InfScalar { value: intercept + &(&self.value * gain), slope: &self.slope * gain }
    }

    /// Rational evaluation at a concrete δ.
    pub fn eval(&self, delta: &Scalar) -> Scalar {
        &self.value + &(&self.slope * delta)
    }
}

impl Add<&InfScalar> for &InfScalar {
    type Output = InfScalar;
    fn add(self, rhs: &InfScalar) -> InfScalar {
        InfScalar { value: &self.value + &rhs.value, slope: &self.slope + &rhs.slope }
    }
}

impl Sub<&InfScalar> for &InfScalar {
    type Output = InfScalar;
    fn sub(self, rhs: &InfScalar) -> InfScalar {
        InfScalar { value: &self.value - &rhs.value, slope: &self.slope - &rhs.slope }
    }
}

impl Mul<&Scalar> for &InfScalar {
    type Output = InfScalar;
    fn mul(self, rhs: &Scalar) -> InfScalar {
        self.scale(rhs)
    }
}

impl Neg for &InfScalar {
    type Output = InfScalar;
    fn neg(self) -> InfScalar {
        InfScalar { value: -&self.value, slope: -&self.slope }
    }
}

impl fmt::Display for InfScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.slope.is_zero() {
            write!(f, "{}", self.value)
        } else {
            write!(f, "{} + {}·δ", self.value, self.slope)
        }
    }
}

/// Lexicographic comparison of two δ-extended values.
pub fn cmp_inf(a: &InfScalar, b: &InfScalar) -> Ordering {
    a.cmp(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(n: i64, d: i64) -> Scalar {
        Scalar::new(n, d)
    }

    fn inf(v: i64, sl: i64) -> InfScalar {
        InfScalar::new(Scalar::from_integer(v), Scalar::from_integer(sl))
    }

    #[test]
    fn cmp_inf_examples() {
        assert_eq!(cmp_inf(&inf(1, 0), &inf(1, -1)), Ordering::Greater);
        assert_eq!(cmp_inf(&inf(1, 5), &inf(2, -100)), Ordering::Less);
        assert_eq!(cmp_inf(&inf(0, 0), &inf(0, 0)), Ordering::Equal);
    }

    #[test]
    fn ext_order_and_partial_addition() {
        let one = ExtScalar::Finite(Scalar::one());
        assert!(ExtScalar::NegInf < one && one < ExtScalar::PosInf);
        assert_eq!(ExtScalar::PosInf.checked_add(&one), Ok(ExtScalar::PosInf));
        assert_eq!(ExtScalar::NegInf.checked_add(&ExtScalar::NegInf), Ok(ExtScalar::NegInf));
        assert_eq!(
            ExtScalar::PosInf.checked_add(&ExtScalar::NegInf),
            Err(NumericError::IndeterminateSum)
        );
        assert_eq!(ExtScalar::PosInf.scale(&s(-1, 2)), ExtScalar::NegInf);
    }

    fn small_rational() -> impl Strategy<Value = Scalar> {
        (-50i64..50, 1i64..20).prop_map(|(n, d)| Scalar::new(n, d))
    }

    fn big_rational() -> impl Strategy<Value = Scalar> {
        (any::<i64>(), 1i64..i64::MAX).prop_map(|(n, d)| Scalar::new(n, d))
    }

    proptest! {
        #[test]
        fn field_axioms_small(a in small_rational(), b in small_rational(), c in small_rational()) {
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&(&a - &b) + &b, a.clone());
            if !b.is_zero() {
                prop_assert_eq!(&(&a / &b) * &b, a);
            }
        }

        #[test]
        fn field_axioms_across_overflow(a in big_rational(), b in big_rational(), c in big_rational()) {
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!((&a * &b).to_big(), a.to_big() * b.to_big());
            prop_assert_eq!(a.cmp(&b), a.to_big().cmp(&b.to_big()));
        }

        #[test]
        fn cmp_inf_matches_tiny_delta(v1 in -1000i64..1000, s1 in -1000i64..1000,
                                      v2 in -1000i64..1000, s2 in -1000i64..1000) {
            // Values on a 1e-3 grid differ by more than 1e-6 whenever unequal.
            let a = InfScalar::new(Scalar::new(v1, 1000), Scalar::from_integer(s1));
            let b = InfScalar::new(Scalar::new(v2, 1000), Scalar::from_integer(s2));
            let delta = Scalar::new(1, 1_000_000_000);
            if v1 != v2 {
                prop_assert_eq!(cmp_inf(&a, &b), a.eval(&delta).cmp(&b.eval(&delta)));
            }
        }
    }
}
