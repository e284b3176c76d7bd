//! Exact rational scalars.
//!
//! Every valuation, utility and matching weight in this crate is a
//! [`Rational`]. Values are kept in lowest terms with a positive
//! denominator by `num_rational`, so equality is structural and the strict
//! comparisons that decide blocking pairs never see rounding.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::Value;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RationalParseError {
    #[error("empty numeric literal")]
    Empty,
    #[error("invalid numeric literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses `"7"`, `"-3/4"`, `"0.25"` or `"1e-3"` exactly.
pub fn parse_rational(text: &str) -> Result<Rational, RationalParseError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(RationalParseError::Empty);
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| RationalParseError::Invalid(s.to_string()))?;
        let den = BigInt::from_str(den.trim()).map_err(|_| RationalParseError::Invalid(s.to_string()))?;
        if den.is_zero() {
            return Err(RationalParseError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rational::new(num, den));
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<Rational, RationalParseError> {
    let invalid = || RationalParseError::Invalid(s.to_string());
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| invalid())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(invalid());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(invalid());
    }
    let joined = format!("{whole}{frac}");
    let mut numer = BigInt::from_str(if joined.is_empty() { "0" } else { &joined }).map_err(|_| invalid())?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Reads a JSON integer, a decimal string or a `"p/q"` string.
///
/// Non-integral JSON numbers are converted through their shortest decimal
/// rendering, so `0.1` becomes `1/10` rather than the nearest binary fraction.
pub fn rational_from_json(value: &Value) -> Result<Rational, RationalParseError> {
    match value {
        Value::Number(num) => {
            if let Some(i) = num.as_i64() {
                Ok(int(i))
            } else if let Some(u) = num.as_u64() {
                Ok(Rational::from_integer(BigInt::from(u)))
            } else {
                parse_decimal(&num.to_string())
            }
        }
        Value::String(s) => parse_rational(s),
        other => Err(RationalParseError::Invalid(other.to_string())),
    }
}

/// Canonical JSON form: integers stay JSON integers when they fit in `i64`,
/// everything else is a `"p/q"` string.
pub fn rational_to_json(value: &Rational) -> Value {
    if value.is_integer() {
        if let Ok(i) = i64::try_from(value.to_integer()) {
            return Value::from(i);
        }
    }
    Value::String(value.to_string())
}

/// Always a string (`"1"`, `"0"`, `"2/3"`); used for matching weights.
pub fn rational_to_string_json(value: &Rational) -> Value {
    Value::String(value.to_string())
}

/// Largest bit length among numerator and denominator.
pub fn bit_size(value: &Rational) -> u64 {
    value.numer().bits().max(value.denom().bits())
}

pub fn is_strictly_between_zero_and_one(value: &Rational) -> bool {
    value.is_positive() && *value < Rational::one()
}
