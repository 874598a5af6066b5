//! Numeric backends.
//!
//! Every solver in this crate is generic over [`Scalar`]. Two backends exist:
//! [`Rational`] (arbitrary precision, the default wherever an attained
//! minimum is claimed) and `f64` (comparisons are made with an absolute
//! tolerance of `1e-9`). A computation is always instantiated with exactly one
//! backend, so the two modes cannot be mixed inside one call.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
pub use num_traits::{One, Zero};
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};

/// Arbitrary precision rational number.
pub type Rational = BigRational;

/// Which arithmetic an instance is computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericMode {
    Exact,
    Float,
}

impl FromStr for NumericMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(NumericMode::Exact),
            "float" => Ok(NumericMode::Float),
            other => Err(Error::Parse(format!("unknown numeric mode `{other}`"))),
        }
    }
}

pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
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
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + AddAssign
    + SubAssign
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + Sum
{
    const MODE: NumericMode;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }

    /// Converts a binary float. Rationals receive the exact binary value.
    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    /// Parses `"p/q"`, integers and decimal literals (`"0.25"`, `"1e-3"`).
    fn parse_str(s: &str) -> Result<Self>;

    /// Lossless textual form: `"p/q"` for rationals, shortest round-trip
    /// representation for floats.
    fn exact_string(&self) -> String;

    /// Absolute tolerance used by comparisons in solvers; zero when exact.
    fn tolerance() -> Self;

    /// Tolerance for the unit-mass check of a probability vector.
    fn mass_tolerance() -> Self;

    fn abs(&self) -> Self;

    fn half(&self) -> Self {
        self.clone() / Self::from_int(2)
    }

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::tolerance()
    }

    /// `self > other` beyond tolerance.
    fn definitely_gt(&self, other: &Self) -> bool {
        self.clone() - other > Self::tolerance()
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self.clone() - other).is_negligible()
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Scalar for Rational {
    const MODE: NumericMode = NumericMode::Exact;

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(x: f64) -> Self {
        Rational::from_float(x).unwrap_or_else(Rational::zero)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn parse_str(s: &str) -> Result<Self> {
        parse_rational(s)
    }

    fn exact_string(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn tolerance() -> Self {
        Rational::zero()
    }

    fn mass_tolerance() -> Self {
        Rational::zero()
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }
}

impl Scalar for f64 {
    const MODE: NumericMode = NumericMode::Float;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn parse_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid number `{s}`")))?;
            let q: f64 = q
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid number `{s}`")))?;
            if q == 0.0 {
                return Err(Error::Parse(format!("zero denominator in `{s}`")));
            }
            return Ok(p / q);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Parse(format!("invalid number `{s}`")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("non-finite number `{s}`")));
        }
        Ok(v)
    }

    fn exact_string(&self) -> String {
        format!("{self:?}")
    }

    fn tolerance() -> Self {
        1e-9
    }

    fn mass_tolerance() -> Self {
        1e-12
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

fn parse_rational(raw: &str) -> Result<Rational> {
    let s = raw.trim();
    let bad = || Error::Parse(format!("invalid number `{raw}`"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_rational(p)?;
        let q = parse_rational(q)?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{raw}`")));
        }
        return Ok(p / q);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let joined = format!("{int_part}{frac_part}");
    let numer: BigInt = if joined.is_empty() {
        BigInt::zero()
    } else {
        joined.parse().map_err(|_| bad())?
    };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = Rational::from_integer(numer);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if negative { -value } else { value })
}

/// Formats a value with twelve significant digits, trailing zeros trimmed.
pub fn decimal_string<S: Scalar>(value: &S) -> String {
    let x = value.to_f64();
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&magnitude) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - magnitude).max(0) as usize;
    let mut out = format!("{x:.decimals$}");
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

/// Sorts and removes duplicates (exact equality for rationals, tolerance for floats).
pub fn sorted_distinct<S: Scalar>(mut values: Vec<S>) -> Vec<S> {
    values.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<S> = Vec::with_capacity(values.len());
    for v in values {
        if out.last().is_none_or(|last| !last.approx_eq(&v)) {
            out.push(v);
        }
    }
    out
}

pub(crate) fn max_all<S: Scalar, I: IntoIterator<Item = S>>(iter: I) -> Option<S> {
    iter.into_iter().reduce(|a, b| a.max_of(b))
}

pub(crate) fn min_all<S: Scalar, I: IntoIterator<Item = S>>(iter: I) -> Option<S> {
    iter.into_iter().reduce(|a, b| a.min_of(b))
}
