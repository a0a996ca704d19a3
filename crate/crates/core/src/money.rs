//! Exact monetary and rate arithmetic.
//!
//! Money is an integer count of micro-units (`10^6` micro-units per unit).
//! Everything that is not an integer amount (discount factors, utilities
//! with fractional conversion factors, margins) is an exact [`Ratio`].
//! The only place a value is ever rounded is [`apply_rate`], which uses
//! round-half-even.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Micro-units per whole unit of money.
pub const MICROS_PER_UNIT: i64 = 1_000_000;

/// Parts-per-million denominator for [`Rate`].
pub const PPM: u64 = 1_000_000;

/// Hours in the 365-day year used to normalise annual rates.
pub const HOURS_PER_YEAR: u64 = 365 * 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithmeticError {
    #[error("amount overflow")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid amount literal {0:?}")]
    InvalidAmount(String),
    #[error("invalid ratio literal {0:?}")]
    InvalidRatio(String),
}

/// A signed amount of money in micro-units.
///
/// Arithmetic is checked; overflow surfaces as [`ArithmeticError::Overflow`]
/// and never wraps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(i64);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub const fn from_micros(micros: i64) -> Self {
        Amount(micros)
    }

    /// Whole units. Panics if `units * 10^6` does not fit; use
    /// [`Amount::try_units`] for untrusted input.
    pub fn units(units: i64) -> Self {
        Self::try_units(units).expect("amount overflow")
    }

    pub fn try_units(units: i64) -> Result<Self, ArithmeticError> {
        units.checked_mul(MICROS_PER_UNIT).map(Amount).ok_or(ArithmeticError::Overflow)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_add(self, rhs: Amount) -> Result<Amount, ArithmeticError> {
        self.0.checked_add(rhs.0).map(Amount).ok_or(ArithmeticError::Overflow)
    }

    pub fn checked_sub(self, rhs: Amount) -> Result<Amount, ArithmeticError> {
        self.0.checked_sub(rhs.0).map(Amount).ok_or(ArithmeticError::Overflow)
    }

    pub fn checked_neg(self) -> Result<Amount, ArithmeticError> {
        self.0.checked_neg().map(Amount).ok_or(ArithmeticError::Overflow)
    }

    pub fn checked_mul_int(self, factor: i64) -> Result<Amount, ArithmeticError> {
        self.0.checked_mul(factor).map(Amount).ok_or(ArithmeticError::Overflow)
    }

    /// Checked sum of an iterator of amounts.
    pub fn checked_sum<I: IntoIterator<Item = Amount>>(items: I) -> Result<Amount, ArithmeticError> {
        items.into_iter().try_fold(Amount::ZERO, |acc, x| acc.checked_add(x))
    }

    /// The amount as an exact rational number of whole units.
    pub fn to_ratio(self) -> Ratio {
        Ratio::new(self.0, MICROS_PER_UNIT).expect("non-zero denominator")
    }

    pub fn min(self, other: Amount) -> Amount {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Amount) -> Amount {
        std::cmp::max(self, other)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / MICROS_PER_UNIT as u64;
        let frac = abs % MICROS_PER_UNIT as u64;
        if frac == 0 {
            write!(f, "{sign}{whole}")
        } else {
            let digits = format!("{frac:06}");
            write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl FromStr for Amount {
    type Err = ArithmeticError;

    /// Parses a decimal number of units with at most six fractional digits.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ArithmeticError::InvalidAmount(s.to_string());
        let t = s.trim();
        let (negative, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if frac.len() > 6 || !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
        let frac_micros: i64 = if frac.is_empty() { 0 } else { format!("{frac:0<6}").parse().map_err(|_| bad())? };
        let micros = whole
            .checked_mul(MICROS_PER_UNIT)
            .and_then(|w| w.checked_add(frac_micros))
            .ok_or(ArithmeticError::Overflow)?;
        Ok(Amount(if negative { -micros } else { micros }))
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Amount {
    /// Accepts a decimal string of units (`"0.031963"`) or a JSON integer
    /// of whole units. Floating point literals are refused.
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(u) => Amount::try_units(u).map_err(serde::de::Error::custom),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A non-negative rate in parts per million.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rate(u64);

impl Rate {
    pub const ZERO: Rate = Rate(0);

    pub const fn from_ppm(ppm: u64) -> Self {
        Rate(ppm)
    }

    /// Basis points; 1 bp = 100 ppm.
    pub const fn from_bps(bps: u64) -> Self {
        Rate(bps * 100)
    }

    pub const fn ppm(self) -> u64 {
        self.0
    }

    pub fn to_ratio(self) -> Ratio {
        Ratio::from_big(BigRational::new(BigInt::from(self.0), BigInt::from(PPM)))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ppm", self.0)
    }
}

/// Round an exact rational to the nearest integer, ties to even.
pub fn round_half_even(value: &BigRational) -> BigInt {
    let floor = value.floor().to_integer();
    let frac = value - BigRational::from_integer(floor.clone());
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    match frac.cmp(&half) {
        Ordering::Less => floor,
        Ordering::Greater => floor + 1,
        Ordering::Equal => {
            if floor.is_even() {
                floor
            } else {
                floor + 1
            }
        }
    }
}

/// Exact (unrounded) value of `principal * rate * hours / 8760`, in micro-units.
pub fn rate_accrual_exact(principal: Amount, rate: Rate, hours: u64) -> BigRational {
    let numer = BigInt::from(principal.micros()) * BigInt::from(rate.ppm()) * BigInt::from(hours);
    let denom = BigInt::from(PPM) * BigInt::from(HOURS_PER_YEAR);
    BigRational::new(numer, denom)
}

/// Accrues an annual `rate` on `principal` over `hours` of model time.
///
/// The intermediate is an exact rational; the result is rounded once to
/// micro-units with round-half-even.
pub fn apply_rate(principal: Amount, rate: Rate, hours: u64) -> Result<Amount, ArithmeticError> {
    let exact = rate_accrual_exact(principal, rate, hours);
    round_half_even(&exact).to_i64().map(Amount::from_micros).ok_or(ArithmeticError::Overflow)
}

/// An exact rational number, always in lowest terms with a positive
/// denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ratio(BigRational);

impl Ratio {
    pub fn new(numer: i64, denom: i64) -> Result<Self, ArithmeticError> {
        if denom == 0 {
            return Err(ArithmeticError::DivisionByZero);
        }
        Ok(Ratio(BigRational::new(BigInt::from(numer), BigInt::from(denom))))
    }

    pub fn from_integer(n: i64) -> Self {
        Ratio(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_big(r: BigRational) -> Self {
        Ratio(r)
    }

    pub fn zero() -> Self {
        Ratio(BigRational::zero())
    }

    pub fn one() -> Self {
        Ratio(BigRational::one())
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }

    pub fn into_big(self) -> BigRational {
        self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn pow(&self, exp: u32) -> Ratio {
        let mut acc = BigRational::one();
        for _ in 0..exp {
            acc *= &self.0;
        }
        Ratio(acc)
    }

    pub fn checked_div(&self, rhs: &Ratio) -> Result<Ratio, ArithmeticError> {
        if rhs.is_zero() {
            return Err(ArithmeticError::DivisionByZero);
        }
        Ok(Ratio(&self.0 / &rhs.0))
    }

    pub fn min(self, other: Ratio) -> Ratio {
        std::cmp::min(self, other)
    }

    /// Lossy conversion for display only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// If the value is a whole number of micro-units, that amount.
    pub fn to_amount(&self) -> Option<Amount> {
        let micros = &self.0 * BigRational::from_integer(BigInt::from(MICROS_PER_UNIT));
        if micros.is_integer() {
            micros.to_integer().to_i64().map(Amount::from_micros)
        } else {
            None
        }
    }
}

impl From<Amount> for Ratio {
    fn from(a: Amount) -> Self {
        a.to_ratio()
    }
}

impl From<i64> for Ratio {
    fn from(n: i64) -> Self {
        Ratio::from_integer(n)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Ratio {
    type Err = ArithmeticError;

    /// Accepts `"n/d"`, integers, and finite decimals such as `"0.75"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ArithmeticError::InvalidRatio(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(ArithmeticError::DivisionByZero);
            }
            return Ok(Ratio(BigRational::new(n, d)));
        }
        let (negative, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
        if (whole.is_empty() && frac.is_empty())
            || !whole.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let digits = format!("{whole}{frac}");
        let numer: BigInt = digits.parse().map_err(|_| bad())?;
        let denom = num_traits::pow(BigInt::from(10), frac.len());
        let r = BigRational::new(numer, denom);
        Ok(Ratio(if negative { -r } else { r }))
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(n) => Ok(Ratio::from_integer(n)),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

macro_rules! ratio_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Ratio> for &Ratio {
            type Output = Ratio;
            fn $method(self, rhs: &Ratio) -> Ratio {
                Ratio(&self.0 $op &rhs.0)
            }
        }
        impl $trait<Ratio> for Ratio {
            type Output = Ratio;
            fn $method(self, rhs: Ratio) -> Ratio {
                Ratio(self.0 $op rhs.0)
            }
        }
        impl $trait<&Ratio> for Ratio {
            type Output = Ratio;
            fn $method(self, rhs: &Ratio) -> Ratio {
                Ratio(self.0 $op &rhs.0)
            }
        }
        impl $trait<Ratio> for &Ratio {
            type Output = Ratio;
            fn $method(self, rhs: Ratio) -> Ratio {
                Ratio(&self.0 $op rhs.0)
            }
        }
    };
}

ratio_binop!(Add, add, +);
ratio_binop!(Sub, sub, -);
ratio_binop!(Mul, mul, *);
// Panics on a zero divisor, like integer division; see `Ratio::checked_div`.
ratio_binop!(Div, div, /);

impl Neg for Ratio {
    type Output = Ratio;
    fn neg(self) -> Ratio {
        Ratio(-self.0)
    }
}

impl Neg for &Ratio {
    type Output = Ratio;
    fn neg(self) -> Ratio {
        Ratio(-&self.0)
    }
}

impl std::iter::Sum for Ratio {
    fn sum<I: Iterator<Item = Ratio>>(iter: I) -> Ratio {
        iter.fold(Ratio::zero(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amount_parse_and_display() {
        assert_eq!("101".parse::<Amount>().unwrap(), Amount::units(101));
        assert_eq!("0.031963".parse::<Amount>().unwrap(), Amount::from_micros(31_963));
        assert_eq!("-4".parse::<Amount>().unwrap(), Amount::units(-4));
        assert_eq!(".5".parse::<Amount>().unwrap(), Amount::from_micros(500_000));
        assert!("1.0000001".parse::<Amount>().is_err());
        assert!("1e3".parse::<Amount>().is_err());
        assert!("".parse::<Amount>().is_err());
        assert_eq!(Amount::from_micros(1_598).to_string(), "0.001598");
        assert_eq!(Amount::units(-26).to_string(), "-26");
        assert_eq!(Amount::from_micros(-1_500_000).to_string(), "-1.5");
    }

    #[test]
    fn amount_overflow_is_an_error() {
        let max = Amount::from_micros(i64::MAX);
        assert_eq!(max.checked_add(Amount::from_micros(1)), Err(ArithmeticError::Overflow));
        assert_eq!(Amount::from_micros(i64::MIN).checked_sub(Amount::from_micros(1)), Err(ArithmeticError::Overflow));
        assert!(Amount::try_units(i64::MAX / 10).is_err());
    }

    #[test]
    fn apply_rate_examples() {
        // 70 * 0.05 * 4 / 8760 = 14/8760 units = 1598.17... micro-units.
        let r = apply_rate(Amount::units(70), Rate::from_ppm(50_000), 4).unwrap();
        assert_eq!(r, Amount::from_micros(1_598));
        assert_eq!(apply_rate(Amount::units(70), Rate::ZERO, 4).unwrap(), Amount::ZERO);
        assert_eq!(apply_rate(Amount::units(100), Rate::from_ppm(1_000_000), 8760).unwrap(), Amount::units(100));
        // A 100% annual rate over one epoch reproduces the 0.031963 figure.
        assert_eq!(apply_rate(Amount::units(70), Rate::from_ppm(1_000_000), 4).unwrap(), Amount::from_micros(31_963));
    }

    #[test]
    fn half_even_ties() {
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(round_half_even(&r(5, 2)), BigInt::from(2));
        assert_eq!(round_half_even(&r(7, 2)), BigInt::from(4));
        assert_eq!(round_half_even(&r(-5, 2)), BigInt::from(-2));
        assert_eq!(round_half_even(&r(-7, 2)), BigInt::from(-4));
        assert_eq!(round_half_even(&r(-1, 3)), BigInt::from(0));
        assert_eq!(round_half_even(&r(2, 3)), BigInt::from(1));
    }

    #[test]
    fn ratio_parse_display() {
        assert_eq!("70/94".parse::<Ratio>().unwrap(), Ratio::new(35, 47).unwrap());
        assert_eq!("0.75".parse::<Ratio>().unwrap(), Ratio::new(3, 4).unwrap());
        assert_eq!("-3".parse::<Ratio>().unwrap(), Ratio::from_integer(-3));
        assert_eq!(Ratio::new(271, 10).unwrap().to_string(), "271/10");
        assert_eq!(Ratio::new(-4, 2).unwrap().to_string(), "-2");
        assert!("1/0".parse::<Ratio>().is_err());
        assert!("abc".parse::<Ratio>().is_err());
        assert_eq!(Ratio::new(1, -2).unwrap(), Ratio::new(-1, 2).unwrap());
    }

    #[test]
    fn ratio_to_amount() {
        assert_eq!(Ratio::new(1, 2).unwrap().to_amount(), Some(Amount::from_micros(500_000)));
        assert_eq!(Ratio::new(1, 3).unwrap().to_amount(), None);
    }
}
