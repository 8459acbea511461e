//! Numeric backends. Compiled networks run over exact rationals; training runs
//! over `f64`.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};
use serde_json::Value as Json;

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + Send + Sync + 'static
{
    /// True when arithmetic is exact.
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    /// `None` when the square root is not representable.
    fn sqrt(&self) -> Option<Self>;
    fn to_json(&self) -> Json;
    fn from_json(v: &Json) -> Result<Self>;

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"p/q"`, `"p"` or a decimal such as `"0.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: `{s}`"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let mut n: BigInt = digits.parse().map_err(|_| bad())?;
        if neg {
            n = -n;
        }
        let d = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(Rational::new(n, d));
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(p))
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn sqrt(&self) -> Option<Self> {
        None
    }
    fn to_json(&self) -> Json {
        if self.is_integer() {
            Json::String(self.numer().to_string())
        } else {
            Json::String(format!("{}/{}", self.numer(), self.denom()))
        }
    }
    fn from_json(v: &Json) -> Result<Self> {
        match v {
            Json::String(s) => parse_rational(s),
            Json::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(<Self as Scalar>::from_i64(i))
                } else {
                    let f = n.as_f64().unwrap_or(f64::NAN);
                    Rational::from_f64(f).ok_or_else(|| Error::Parse(format!("bad number {n}")))
                }
            }
            other => Err(Error::Parse(format!("expected rational, got {other}"))),
        }
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn from_i64(v: i64) -> Self {
                v as $t
            }
            fn from_rational(r: &Rational) -> Self {
                ToPrimitive::to_f64(r).unwrap_or(f64::NAN) as $t
            }
            fn to_f64(&self) -> f64 {
                *self as f64
            }
            fn sqrt(&self) -> Option<Self> {
                Some(<$t>::sqrt(*self))
            }
            fn to_json(&self) -> Json {
                serde_json::Number::from_f64(*self as f64)
                    .map(Json::Number)
                    .unwrap_or(Json::Null)
            }
            fn from_json(v: &Json) -> Result<Self> {
                match v {
                    Json::Number(n) => Ok(n.as_f64().unwrap_or(f64::NAN) as $t),
                    Json::String(s) => Ok(<Self as Scalar>::from_rational(&parse_rational(s)?)),
                    other => Err(Error::Parse(format!("expected number, got {other}"))),
                }
            }
        }
    };
}

float_scalar!(f64);
float_scalar!(f32);

pub(crate) fn vec_to_json<S: Scalar>(v: &[S]) -> Json {
    Json::Array(v.iter().map(Scalar::to_json).collect())
}

pub(crate) fn vec_from_json<S: Scalar>(v: &Json) -> Result<Vec<S>> {
    v.as_array()
        .ok_or_else(|| Error::Parse("expected array".into()))?
        .iter()
        .map(S::from_json)
        .collect()
}

/// `0` or `1` in any backend.
pub fn indicator<S: Scalar>(b: bool) -> S {
    if b {
        S::one()
    } else {
        S::zero()
    }
}

/// Product of a non-empty list, reduced pairwise.
pub fn pairwise_product<S: Scalar>(mut xs: Vec<S>) -> S {
    if xs.is_empty() {
        return S::one();
    }
    while xs.len() > 1 {
        let mut next = Vec::with_capacity(xs.len().div_ceil(2));
        let mut it = xs.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a * b),
                None => next.push(a),
            }
        }
        xs = next;
    }
    xs.pop().unwrap_or_else(S::one)
}
