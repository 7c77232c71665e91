use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::{NumericError, Scalar};

/// A polynomial in a formal positive infinitesimal ε.
///
/// `coeffs[k]` is the coefficient of `ε^k`; trailing zeros are trimmed so the
/// zero polynomial has no coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct EpsPoly {
    coeffs: Vec<Scalar>,
}

impl EpsPoly {
    pub fn new(mut coeffs: Vec<Scalar>) -> Self {
        while coeffs.last().is_some_and(Scalar::is_zero) {
            coeffs.pop();
        }
        EpsPoly { coeffs }
    }

    pub fn zero() -> Self {
        EpsPoly::default()
    }

    pub fn constant(c: Scalar) -> Self {
        EpsPoly::new(vec![c])
    }

    /// `c · ε^k`
    pub fn monomial(c: Scalar, k: usize) -> Self {
        let mut coeffs = vec![Scalar::zero(); k + 1];
        coeffs[k] = c;
        EpsPoly::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Scalar {
        self.coeffs.get(k).cloned().unwrap_or_default()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Sign for all sufficiently small ε > 0: the sign of the lowest nonzero
    /// coefficient.
    pub fn signum(&self) -> Ordering {
        self.coeffs
            .iter()
            .map(Scalar::signum)
            .find(|s| *s != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    }

    pub fn scale(&self, k: &Scalar) -> EpsPoly {
        EpsPoly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn eval(&self, eps: &Scalar) -> Scalar {
        self.coeffs
            .iter()
            .rev()
            .fold(Scalar::zero(), |acc, c| &(&acc * eps) + c)
    }
}

impl Add<&EpsPoly> for &EpsPoly {
    type Output = EpsPoly;
    fn add(self, rhs: &EpsPoly) -> EpsPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        EpsPoly::new((0..n).map(|k| &self.coeff(k) + &rhs.coeff(k)).collect())
    }
}

impl Sub<&EpsPoly> for &EpsPoly {
    type Output = EpsPoly;
    fn sub(self, rhs: &EpsPoly) -> EpsPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        EpsPoly::new((0..n).map(|k| &self.coeff(k) - &rhs.coeff(k)).collect())
    }
}

impl Mul<&EpsPoly> for &EpsPoly {
    type Output = EpsPoly;
    fn mul(self, rhs: &EpsPoly) -> EpsPoly {
        if self.is_zero() || rhs.is_zero() {
            return EpsPoly::zero();
        }
        let mut out = vec![Scalar::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += &(a * b);
            }
        }
        EpsPoly::new(out)
    }
}

impl Neg for &EpsPoly {
    type Output = EpsPoly;
    fn neg(self) -> EpsPoly {
        EpsPoly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl fmt::Debug for EpsPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for EpsPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})ε")?,
                _ => write!(f, "({c})ε^{k}")?,
            }
        }
        Ok(())
    }
}

/// Order of two ε-polynomials for every sufficiently small ε > 0.
pub fn cmp_eps(a: &EpsPoly, b: &EpsPoly) -> Ordering {
    let n = a.coeffs.len().max(b.coeffs.len());
    (0..n)
        .map(|k| a.coeff(k).cmp(&b.coeff(k)))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// A quotient of ε-polynomials, stored with a denominator that is positive
/// in the ε-order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpsRatio {
    num: EpsPoly,
    den: EpsPoly,
}

impl EpsRatio {
    pub fn new(num: EpsPoly, den: EpsPoly) -> Result<Self, NumericError> {
        match den.signum() {
            Ordering::Equal => Err(NumericError::ZeroDenominator),
            Ordering::Greater => Ok(EpsRatio { num, den }),
            Ordering::Less => Ok(EpsRatio { num: -&num, den: -&den }),
        }
    }

    pub fn num(&self) -> &EpsPoly {
        &self.num
    }

    pub fn den(&self) -> &EpsPoly {
        &self.den
    }

    pub fn signum(&self) -> Ordering {
        self.num.signum()
    }
}

impl fmt::Display for EpsRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

/// Exact order of two ratios near ε = 0⁺ by cross-multiplication.
pub fn cmp_ratio(a: &EpsRatio, b: &EpsRatio) -> Ordering {
    cmp_eps(&(&a.num * &b.den), &(&b.num * &a.den))
}

/// A point whose coordinates are ε-polynomials.
pub type EpsPoint = Vec<EpsPoly>;
