//! Integer-cent money and exact decimal parsing.
//!
//! Every price, fee and budget is held as a whole number of cents so that
//! profit accounting, the budget knapsack and the bound verifiers run in exact
//! integer arithmetic. Decimal inputs with a non-zero sub-cent part are
//! rejected rather than rounded.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const CENTS_PER_DOLLAR: i64 = 100;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_cents(cents: i64) -> Self {
        Money(cents)
    }

    pub const fn cents(self) -> i64 {
        self.0
    }

    pub fn from_dollars(dollars: i64) -> Self {
        Money(dollars * CENTS_PER_DOLLAR)
    }

    pub fn as_dollars(self) -> f64 {
        self.0 as f64 / CENTS_PER_DOLLAR as f64
    }

    /// Exact dollar value.
    pub fn to_ratio(self) -> Ratio<i128> {
        Ratio::new(self.0 as i128, CENTS_PER_DOLLAR as i128)
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn times(self, shares: i64) -> Money {
        Money(self.0 * shares)
    }

    pub fn parse(s: &str) -> Result<Money> {
        let cents = parse_scaled(s, 2).map_err(|message| Error::Money {
            input: s.to_string(),
            message,
        })?;
        i64::try_from(cents)
            .map(Money)
            .map_err(|_| Error::Money {
                input: s.to_string(),
                message: "out of range".into(),
            })
    }

    /// Converts a float through its shortest round-trip decimal form, so that
    /// `0.1` becomes 10 cents rather than failing on binary noise.
    pub fn from_f64(v: f64) -> Result<Money> {
        if !v.is_finite() {
            return Err(Error::Money {
                input: v.to_string(),
                message: "not finite".into(),
            });
        }
        Money::parse(&format!("{v}"))
    }
}

/// Parses an optionally signed decimal into an integer scaled by `10^digits`,
/// refusing any non-zero digit beyond that precision.
fn parse_scaled(s: &str, digits: u32) -> std::result::Result<i128, String> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err("empty number".into());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err("not a decimal number".into());
    }
    let scale = 10i128.pow(digits);
    let mut value: i128 = 0;
    for c in int_part.chars() {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add((c as u8 - b'0') as i128))
            .ok_or("too large")?;
    }
    value = value.checked_mul(scale).ok_or("too large")?;
    let mut place = scale / 10;
    for (i, c) in frac_part.chars().enumerate() {
        let d = (c as u8 - b'0') as i128;
        if i as u32 >= digits {
            if d != 0 {
                return Err(format!("more than {digits} significant fraction digits"));
            }
            continue;
        }
        value += d * place;
        place /= 10;
    }
    Ok(if neg { -value } else { value })
}

/// Parses a non-negative-or-negative decimal (up to 12 fraction digits) or a
/// `num/den` fraction into an exact rational.
pub fn parse_ratio(s: &str) -> Result<Ratio<i64>> {
    let bad = |message: String| Error::Money {
        input: s.to_string(),
        message,
    };
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad("bad numerator".into()))?;
        let d: i64 = d.trim().parse().map_err(|_| bad("bad denominator".into()))?;
        if d == 0 {
            return Err(bad("zero denominator".into()));
        }
        return Ok(Ratio::new(n, d));
    }
    const DIGITS: u32 = 12;
    let scaled = parse_scaled(s, DIGITS).map_err(bad)?;
    let scaled = i64::try_from(scaled).map_err(|_| bad("out of range".into()))?;
    Ok(Ratio::new(scaled, 10i64.pow(DIGITS)))
}

pub fn ratio_from_f64(v: f64) -> Result<Ratio<i64>> {
    if !v.is_finite() {
        return Err(Error::Money {
            input: v.to_string(),
            message: "not finite".into(),
        });
    }
    parse_ratio(&format!("{v}"))
}

pub fn ratio_to_f64(r: &Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn ratio128_to_f64(r: &Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn widen(r: Ratio<i64>) -> Ratio<i128> {
    Ratio::new_raw(*r.numer() as i128, *r.denom() as i128)
}

/// Renders an exact rational as a short decimal when it terminates, and as
/// `num/den` otherwise.
pub fn format_ratio(r: &Ratio<i64>) -> String {
    let mut d = *r.denom();
    while d % 2 == 0 {
        d /= 2;
    }
    while d % 5 == 0 {
        d /= 5;
    }
    if d != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let mut digits = 0u32;
    while (r * Ratio::from_integer(10i64.pow(digits))).denom() != &1 {
        digits += 1;
    }
    let scaled = (r * Ratio::from_integer(10i64.pow(digits))).to_integer();
    if digits == 0 {
        return scaled.to_string();
    }
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.unsigned_abs();
    let p = 10u64.pow(digits);
    format!("{sign}{}.{:0width$}", abs / p, abs % p, width = digits as usize)
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl FromStr for Money {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Money::parse(s)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
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

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

struct MoneyVisitor;

impl Visitor<'_> for MoneyVisitor {
    type Value = Money;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a decimal money amount as string or number")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Money, E> {
        Money::parse(v).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Money, E> {
        v.checked_mul(CENTS_PER_DOLLAR)
            .map(Money)
            .ok_or_else(|| E::custom("money out of range"))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Money, E> {
        let v = i64::try_from(v).map_err(|_| E::custom("money out of range"))?;
        self.visit_i64(v)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Money, E> {
        Money::from_f64(v).map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Money, D::Error> {
        deserializer.deserialize_any(MoneyVisitor)
    }
}

/// Exact rational parameter that reads from JSON numbers or `"num/den"` /
/// decimal strings and writes back as a string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(pub Ratio<i64>);

impl Rational {
    pub fn integer(v: i64) -> Self {
        Rational(Ratio::from_integer(v))
    }

    pub fn to_f64(self) -> f64 {
        ratio_to_f64(&self.0)
    }
}

impl From<Ratio<i64>> for Rational {
    fn from(r: Ratio<i64>) -> Self {
        Rational(r)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_ratio(&self.0))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

struct RationalVisitor;

impl Visitor<'_> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number, decimal string or fraction string")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Rational, E> {
        parse_ratio(v).map(Rational).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Rational, E> {
        Ok(Rational::integer(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Rational, E> {
        i64::try_from(v)
            .map(Rational::integer)
            .map_err(|_| E::custom("value out of range"))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Rational, E> {
        ratio_from_f64(v).map(Rational).map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Rational, D::Error> {
        deserializer.deserialize_any(RationalVisitor)
    }
}
