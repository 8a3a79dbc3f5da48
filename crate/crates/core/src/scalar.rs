//! Numeric plumbing: exact half-integers for Gromov products and a small
//! scalar trait so the probability code runs over floats or exact rationals.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An exact half-integer, stored as twice its value.
///
/// Every Gromov product `½[d(x,y) + d(x,z) − d(y,z)]` of integer distances is
/// a half-integer, so comparisons against thresholds such as `K` or `D` stay
/// exact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Half(i64);

impl Half {
    pub const ZERO: Half = Half(0);

    pub const fn from_int(n: i64) -> Self {
        Half(2 * n)
    }

    pub const fn from_doubled(doubled: i64) -> Self {
        Half(doubled)
    }

    pub const fn doubled(self) -> i64 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// Smallest integer not below the value.
    pub fn ceil(self) -> i64 {
        self.0.div_euclid(2) + self.0.rem_euclid(2)
    }

    /// Largest integer not above the value.
    pub fn floor(self) -> i64 {
        self.0.div_euclid(2)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn to_rational(self) -> BigRational {
        BigRational::new(BigInt::from(self.0), BigInt::from(2))
    }

    /// Next half-integer strictly above `self`.
    pub fn succ(self) -> Self {
        Half(self.0 + 1)
    }

    pub fn max(self, other: Half) -> Half {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl From<i64> for Half {
    fn from(n: i64) -> Self {
        Half::from_int(n)
    }
}

impl Add for Half {
    type Output = Half;
    fn add(self, rhs: Half) -> Half {
        Half(self.0 + rhs.0)
    }
}

impl Sub for Half {
    type Output = Half;
    fn sub(self, rhs: Half) -> Half {
        Half(self.0 - rhs.0)
    }
}

impl Neg for Half {
    type Output = Half;
    fn neg(self) -> Half {
        Half(-self.0)
    }
}

impl Mul<i64> for Half {
    type Output = Half;
    fn mul(self, rhs: i64) -> Half {
        Half(self.0 * rhs)
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            let sign = if self.0 < 0 { "-" } else { "" };
            write!(f, "{}{}.5", sign, self.0.abs() / 2)
        }
    }
}

impl FromStr for Half {
    type Err = Error;

    /// Accepts `3`, `3.5`, `-0.5` and `7/2`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not a half-integer: {s:?}"));
        if let Some((num, den)) = s.split_once('/') {
            let num: i64 = num.trim().parse().map_err(|_| bad())?;
            let den: i64 = den.trim().parse().map_err(|_| bad())?;
            return match den {
                1 => Ok(Half(2 * num)),
                2 => Ok(Half(num)),
                _ => Err(bad()),
            };
        }
        if let Some((int, frac)) = s.split_once('.') {
            let negative = int.starts_with('-');
            let whole: i64 = if int == "-" || int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let frac = frac.trim_end_matches('0');
            let half = match frac {
                "" => 0,
                "5" => 1,
                _ => return Err(bad()),
            };
            let doubled = 2 * whole.abs() + half;
            return Ok(Half(if negative { -doubled } else { doubled }));
        }
        let n: i64 = s.parse().map_err(|_| bad())?;
        Ok(Half(2 * n))
    }
}

impl Serialize for Half {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_integer() {
            serializer.serialize_i64(self.0 / 2)
        } else {
            serializer.serialize_f64(self.to_f64())
        }
    }
}

impl<'de> Deserialize<'de> for Half {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        let doubled = value * 2.0;
        if doubled.fract() != 0.0 || !doubled.is_finite() {
            return Err(serde::de::Error::custom(format!("{value} is not a half-integer")));
        }
        Ok(Half(doubled as i64))
    }
}

/// Field-like scalar used by the probability code.
///
/// Implemented for `f32`, `f64` and exact [`BigRational`]; the exact
/// instantiation is the reference, the float ones are for fast plotting.
pub trait Scalar: Num + Clone + PartialOrd + fmt::Debug {
    /// The value `num / den`.
    fn ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;

    fn from_int(n: i64) -> Self {
        Self::ratio(n, 1)
    }

    /// Integer power with negative exponents allowed.
    fn powi(&self, exp: i32) -> Self {
        let mut base = if exp < 0 {
            Self::one() / self.clone()
        } else {
            self.clone()
        };
        let mut e = exp.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        acc
    }
}

impl Scalar for f64 {
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn ratio(num: i64, den: i64) -> Self {
        num as f32 / den as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Scalar for BigRational {
    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }
}

/// Float approximation of a big rational that survives huge numerators and
/// denominators (plain `to_f64` overflows to NaN once both exceed `f64::MAX`).
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() {
            return n / d;
        }
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    let n_bits = r.numer().bits() as i64;
    let d_bits = r.denom().bits() as i64;
    let shift_n = (n_bits - 60).max(0) as usize;
    let shift_d = (d_bits - 60).max(0) as usize;
    let n = (r.numer().abs() >> shift_n).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d).to_f64().unwrap_or(1.0);
    sign * (n / d) * 2f64.powi((shift_n as i64 - shift_d as i64) as i32)
}

/// Parse `p/q`, an integer or a decimal such as `0.99` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = BigRational::new(n, d);
        return Ok(if negative { -r } else { r });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// Serde adapters writing exact numbers as text (`"71/90"`, `"66"`) instead
/// of digit arrays, so JSON reports stay readable and round-trip exactly.
pub mod text {
    use std::collections::BTreeMap;
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Display, S: Serializer>(value: &T, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(deserializer: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(deserializer)?.parse().map_err(D::Error::custom)
    }

    /// Maps whose values are written as text.
    pub mod map {
        use super::*;

        pub fn serialize<K, V, S>(map: &BTreeMap<K, V>, serializer: S) -> Result<S::Ok, S::Error>
        where
            K: Serialize + Ord,
            V: Display,
            S: Serializer,
        {
            let text: BTreeMap<&K, String> = map.iter().map(|(k, v)| (k, v.to_string())).collect();
            text.serialize(serializer)
        }

        pub fn deserialize<'de, K, V, D>(deserializer: D) -> Result<BTreeMap<K, V>, D::Error>
        where
            K: Deserialize<'de> + Ord,
            V: FromStr,
            V::Err: Display,
            D: Deserializer<'de>,
        {
            BTreeMap::<K, String>::deserialize(deserializer)?
                .into_iter()
                .map(|(k, v)| v.parse().map(|v| (k, v)).map_err(D::Error::custom))
                .collect()
        }
    }

    /// `(index, value)` lists whose values are written as text.
    pub mod pairs {
        use super::*;

        pub fn serialize<V: Display, S: Serializer>(pairs: &[(usize, V)], serializer: S) -> Result<S::Ok, S::Error> {
            let text: Vec<(usize, String)> = pairs.iter().map(|(k, v)| (*k, v.to_string())).collect();
            text.serialize(serializer)
        }

        pub fn deserialize<'de, V, D>(deserializer: D) -> Result<Vec<(usize, V)>, D::Error>
        where
            V: FromStr,
            V::Err: Display,
            D: Deserializer<'de>,
        {
            Vec::<(usize, String)>::deserialize(deserializer)?
                .into_iter()
                .map(|(k, v)| v.parse().map(|v| (k, v)).map_err(D::Error::custom))
                .collect()
        }
    }
}
