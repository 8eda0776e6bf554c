use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const PER_DOLLAR: i64 = 1_000_000;

/// An amount of money in millionths of a dollar, fine enough for per-unit
/// rates below a cent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: i64) -> Self {
        Money(micros)
    }

    pub const fn from_mills(mills: i64) -> Self {
        Money(mills * 1000)
    }

    pub const fn from_cents(cents: i64) -> Self {
        Money(cents * 10_000)
    }

    /// Rounds to the nearest micro-dollar.
    pub fn from_dollars(dollars: f64) -> Self {
        Money((dollars * PER_DOLLAR as f64).round() as i64)
    }

    pub fn micros(self) -> i64 {
        self.0
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / PER_DOLLAR as f64
    }

    /// Rounds to a multiple of `step`.
    pub fn round_to(self, step: Money) -> Money {
        Money((self.0 as f64 / step.0 as f64).round() as i64 * step.0)
    }

    /// Nearest whole cent, as paid out.
    pub fn round_cents(self) -> Money {
        self.round_to(Money::from_cents(1))
    }

    /// `self * factor`, rounded to the nearest micro-dollar.
    pub fn times(self, factor: f64) -> Self {
        Money((self.0 as f64 * factor).round() as i64)
    }

    pub fn max(self, other: Money) -> Money {
        Money(self.0.max(other.0))
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

/// Dollars with at least two decimals; more only when a fraction of a cent
/// remains.
impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let m = self.0.unsigned_abs();
        let whole = m / PER_DOLLAR as u64;
        let frac = format!("{:06}", m % PER_DOLLAR as u64);
        let frac = frac.trim_end_matches('0');
        write!(f, "{sign}${whole}.{frac:0<2}")
    }
}

impl FromStr for Money {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let t = t.strip_prefix('$').unwrap_or(t);
        let (whole, frac) = t.split_once('.').unwrap_or((t, ""));
        let bad = || Error::Invalid(format!("not a dollar amount: {s:?}"));
        if whole.is_empty() && frac.is_empty() || frac.len() > 6 {
            return Err(bad());
        }
        let whole: i64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let frac_micros: i64 = if frac.is_empty() {
            0
        } else {
            if !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            format!("{frac:0<6}").parse().map_err(|_| bad())?
        };
        let m = whole * PER_DOLLAR + frac_micros;
        Ok(Money(if neg { -m } else { m }))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.dollars())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(Money::from_dollars(x)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
