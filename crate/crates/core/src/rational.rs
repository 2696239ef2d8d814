//! Exact rationals and the integer scalars the solvers run on.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num::{BigInt, BigRational, Integer, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type Rational = BigRational;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// `2^-k` as an exact rational.
pub fn pow2_inv(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k as usize)
}

/// Fractional part, always in `[0, 1)`.
pub fn frac(r: &Rational) -> Rational {
    r - r.floor()
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Human-readable decimal with six significant digits.
pub fn approx(r: &Rational) -> String {
    let v = to_f64(r);
    if v == 0.0 {
        return "0".to_string();
    }
    let s = format!("{:.5e}", v);
    // `{:e}` always parses back
    let parsed: f64 = s.parse().unwrap_or(v);
    format!("{}", parsed)
}

/// Parses `"3/8"`, `"-2"`, or a finite decimal such as `"0.15"` exactly.
pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((whole, fraction)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let whole_abs = whole.trim_start_matches(['-', '+']);
        if !fraction.chars().all(|c| c.is_ascii_digit()) || fraction.is_empty() {
            return None;
        }
        let w: BigInt = if whole_abs.is_empty() { BigInt::zero() } else { whole_abs.parse().ok()? };
        let f: BigInt = fraction.parse().ok()?;
        let scale = num::pow(BigInt::from(10), fraction.len());
        let mut r = Rational::new(w * &scale + f, scale);
        if negative {
            r = -r;
        }
        return Some(r);
    }
    let n: BigInt = s.parse().ok()?;
    Some(Rational::from_integer(n))
}

/// JSON form of a rational: decimal strings for numerator and denominator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalParts {
    pub num: String,
    pub den: String,
}

impl From<&Rational> for RationalParts {
    fn from(r: &Rational) -> Self {
        RationalParts { num: r.numer().to_string(), den: r.denom().to_string() }
    }
}

impl TryFrom<RationalParts> for Rational {
    type Error = String;

    fn try_from(p: RationalParts) -> Result<Self, Self::Error> {
        let num: BigInt = p.num.trim().parse().map_err(|_| format!("bad numerator {:?}", p.num))?;
        let den: BigInt = p.den.trim().parse().map_err(|_| format!("bad denominator {:?}", p.den))?;
        if den.is_zero() {
            return Err("zero denominator".into());
        }
        Ok(Rational::new(num, den))
    }
}

/// `#[serde(with = "parts")]` for a single rational.
pub mod parts {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        RationalParts::from(r).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        RationalInput::deserialize(d)?.into_rational().map_err(serde::de::Error::custom)
    }
}

/// Accepted input forms: `{"num", "den"}` or a string such as `"3/8"` or `"0.25"`.
#[derive(Deserialize)]
#[serde(untagged)]
enum RationalInput {
    Parts(RationalParts),
    Text(String),
}

impl RationalInput {
    fn into_rational(self) -> Result<Rational, String> {
        match self {
            RationalInput::Parts(p) => Rational::try_from(p),
            RationalInput::Text(t) => parse(&t).ok_or_else(|| format!("bad rational {t:?}")),
        }
    }
}

pub mod parts_vec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let p: Vec<RationalParts> = v.iter().map(RationalParts::from).collect();
        p.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let p = Vec::<RationalInput>::deserialize(d)?;
        p.into_iter().map(|p| p.into_rational().map_err(serde::de::Error::custom)).collect()
    }
}

pub mod parts_opt {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(RationalParts::from).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let p = Option::<RationalInput>::deserialize(d)?;
        p.map(|p| p.into_rational().map_err(serde::de::Error::custom)).transpose()
    }
}

/// Integer arithmetic used inside the solvers once costs have been scaled
/// to a common denominator. `i128` when the magnitudes allow, `BigInt`
/// otherwise.
pub(crate) trait Scalar:
    Clone + Ord + Debug + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Send + Sync
{
    fn from_big(v: &BigInt) -> Option<Self>;
    fn from_usize(v: usize) -> Self;

    fn abs_diff(&self, other: &Self) -> Self {
        if self >= other {
            self.clone() - other.clone()
        } else {
            other.clone() - self.clone()
        }
    }
}

impl Scalar for i128 {
    fn from_big(v: &BigInt) -> Option<Self> {
        v.to_i128()
    }
    fn from_usize(v: usize) -> Self {
        v as i128
    }
}

impl Scalar for BigInt {
    fn from_big(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }
    fn from_usize(v: usize) -> Self {
        BigInt::from(v)
    }
}

/// Least common denominator of `values` and the numerators over it.
pub(crate) fn common_scale<'a, I>(values: I) -> (BigInt, Vec<BigInt>)
where
    I: IntoIterator<Item = &'a Rational>,
    I::IntoIter: Clone,
{
    let it = values.into_iter();
    let mut scale = BigInt::one();
    for v in it.clone() {
        if !scale.is_multiple_of(v.denom()) {
            scale = scale.lcm(v.denom());
        }
    }
    let nums = it.map(|v| v.numer() * (&scale / v.denom())).collect();
    (scale, nums)
}

/// Whether integers up to `max_abs` in magnitude can be combined `headroom`
/// times without leaving `i128`.
pub(crate) fn fits_i128(max_abs: &BigInt, headroom: usize) -> bool {
    let limit = BigInt::from(i128::MAX) / BigInt::from(headroom.max(1) as u64 + 1);
    max_abs.abs() <= limit
}

pub(crate) fn max_abs(values: &[BigInt]) -> BigInt {
    values.iter().map(|v| v.abs()).max().unwrap_or_else(BigInt::zero)
}
