//! Arithmetic backends.
//!
//! Every analysis runs over one [`Scalar`] type: [`Rational`] for exact
//! verdicts, or `f64` when coefficients are irrational or speed matters.
//! The trait carries the handful of backend-specific kernels (null spaces,
//! column spaces, least-norm solves, matrix exponentials); everything else
//! in the crate is written once, generically.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::subspace::Tolerance;

/// Arbitrary-precision rational number.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid scalar literal {0:?}")]
pub struct ParseScalarError(pub String);

pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True for the exact rational backend.
    const EXACT: bool;
    /// Backend name used in reports.
    const NAME: &'static str;

    fn from_rational(r: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    fn is_finite(&self) -> bool;
    /// `|self|` as a float, used for pivot selection.
    fn magnitude(&self) -> f64;
    /// Zero test. The exact backend ignores `threshold`.
    fn is_negligible(&self, threshold: f64) -> bool;
    fn to_json(&self) -> serde_json::Value;

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(v)))
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&Rational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn is_positive(&self) -> bool;

    /// Orthonormal (float) or reduced column-echelon (exact) basis of `ker m`.
    fn kernel_basis(m: &Matrix<Self>, tol: &Tolerance) -> Matrix<Self>;
    /// Canonical basis of the column space of `m`.
    fn image_basis(m: &Matrix<Self>, tol: &Tolerance) -> Matrix<Self>;
    /// Minimum-norm solution of the consistent system `m x = rhs`, or `None`
    /// when the system has no solution.
    fn least_norm_solve(m: &Matrix<Self>, rhs: &[Self], tol: &Tolerance) -> Option<Vec<Self>>;
    /// `exp(m)` together with an upper bound on the 1-norm of the truncation
    /// error (zero for the float backend, which is accurate to rounding).
    fn expm(m: &Matrix<Self>) -> (Matrix<Self>, f64);
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const NAME: &'static str = "float";

    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn magnitude(&self) -> f64 {
        self.abs()
    }

    fn is_negligible(&self, threshold: f64) -> bool {
        self.abs() <= threshold
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(*self)
    }

    fn is_positive(&self) -> bool {
        *self > 0.0
    }

    fn kernel_basis(m: &Matrix<Self>, tol: &Tolerance) -> Matrix<Self> {
        crate::subspace::float::kernel(m, tol)
    }

    fn image_basis(m: &Matrix<Self>, tol: &Tolerance) -> Matrix<Self> {
        crate::subspace::float::image(m, tol)
    }

    fn least_norm_solve(m: &Matrix<Self>, rhs: &[Self], tol: &Tolerance) -> Option<Vec<Self>> {
        crate::subspace::float::least_norm_solve(m, rhs, tol)
    }

    fn expm(m: &Matrix<Self>) -> (Matrix<Self>, f64) {
        (crate::expm::expm_pade(m), 0.0)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    const NAME: &'static str = "exact";

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_finite(&self) -> bool {
        true
    }

    fn magnitude(&self) -> f64 {
        Scalar::to_f64(&self.abs())
    }

    fn is_negligible(&self, _threshold: f64) -> bool {
        self.is_zero()
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }

    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }

    fn kernel_basis(m: &Matrix<Self>, _tol: &Tolerance) -> Matrix<Self> {
        crate::subspace::exact::kernel(m)
    }

    fn image_basis(m: &Matrix<Self>, _tol: &Tolerance) -> Matrix<Self> {
        crate::subspace::exact::image(m)
    }

    fn least_norm_solve(m: &Matrix<Self>, rhs: &[Self], _tol: &Tolerance) -> Option<Vec<Self>> {
        crate::subspace::exact::least_norm_solve(m, rhs)
    }

    fn expm(m: &Matrix<Self>) -> (Matrix<Self>, f64) {
        crate::expm::expm_series(m, crate::expm::SERIES_DEGREE)
    }
}

/// Parses `"p/q"`, integers and decimal literals (with optional exponent)
/// into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, ParseScalarError> {
    let err = || ParseScalarError(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((p, q)) = t.split_once('/') {
        let p = parse_decimal(p.trim()).ok_or_else(err)?;
        let q = parse_decimal(q.trim()).ok_or_else(err)?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(p / q);
    }
    parse_decimal(t).ok_or_else(err)
}

fn parse_decimal(t: &str) -> Option<Rational> {
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(all.parse::<BigInt>().ok()?);
    let shift = exponent - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    if shift >= 0 {
        for _ in 0..shift {
            value *= ten.clone();
        }
    } else {
        for _ in 0..(-shift) {
            value /= ten.clone();
        }
    }
    Some(if negative { -value } else { value })
}

/// Converts a JSON scalar (number or `"p/q"` string) into an exact rational.
/// Floats go through their shortest round-trip decimal form, so `0.1`
/// becomes exactly `1/10`.
pub fn rational_from_json(v: &serde_json::Value) -> Result<Rational, ParseScalarError> {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Rational::from_integer(BigInt::from(i)))
            } else if let Some(u) = n.as_u64() {
                Ok(Rational::from_integer(BigInt::from(u)))
            } else {
                let f = n.as_f64().ok_or_else(|| ParseScalarError(n.to_string()))?;
                parse_rational(&format!("{f}"))
            }
        }
        serde_json::Value::String(s) => parse_rational(s),
        other => Err(ParseScalarError(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/4").unwrap(), q(3, 4));
        assert_eq!(parse_rational("-6/8").unwrap(), q(-3, 4));
        assert_eq!(parse_rational("0.1").unwrap(), q(1, 10));
        assert_eq!(parse_rational("2.5e-1").unwrap(), q(1, 4));
        assert_eq!(parse_rational("12").unwrap(), q(12, 1));
        assert_eq!(parse_rational("1E2").unwrap(), q(100, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn json_numbers_are_read_as_decimals() {
        let v: serde_json::Value = serde_json::from_str("[0.1, 7, \"1/3\", -2.5]").unwrap();
        let parsed: Vec<_> = v
            .as_array()
            .unwrap()
            .iter()
            .map(|x| rational_from_json(x).unwrap())
            .collect();
        assert_eq!(parsed, vec![q(1, 10), q(7, 1), q(1, 3), q(-5, 2)]);
        assert!(rational_from_json(&serde_json::json!(true)).is_err());
    }

    #[test]
    fn exact_display_round_trips() {
        let x = q(-7, 3);
        assert_eq!(parse_rational(&x.to_string()).unwrap(), x);
        assert_eq!(x.to_json(), serde_json::json!("-7/3"));
    }
}
