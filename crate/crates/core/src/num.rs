//! Exact arithmetic helpers shared by every solver.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"p/q"` or `"p"` into a reduced rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(Rational::from_integer(BigInt::from_str(s).map_err(|_| bad())?)),
    }
}

/// Canonical string form: `"p"` for integers, `"p/q"` otherwise.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact rational image of a finite binary64 value.
pub fn from_f64(x: f64) -> Rational {
    Rational::from_float(x).expect("finite float")
}

/// `a / b` as an integer fraction with positive denominator, unreduced.
fn quotient_parts(a: &Rational, b: &Rational) -> (BigInt, BigInt) {
    let n = a.numer() * b.denom();
    let d = a.denom() * b.numer();
    if d.is_negative() {
        (-n, -d)
    } else {
        (n, d)
    }
}

pub fn ceil_div(a: &Rational, b: &Rational) -> BigInt {
    let (n, d) = quotient_parts(a, b);
    n.div_ceil(&d)
}

pub fn floor_div(a: &Rational, b: &Rational) -> BigInt {
    let (n, d) = quotient_parts(a, b);
    n.div_floor(&d)
}

/// Largest integer `s >= 0` with `s * s <= x`, or `None` when `x < 0`.
pub fn isqrt_floor(x: &Rational) -> Option<BigInt> {
    if x.is_negative() {
        return None;
    }
    let fl = x.floor().to_integer();
    Some(fl.sqrt())
}

/// Accuracy parameter restricted to the form `1/q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Epsilon {
    q: u32,
}

impl Epsilon {
    pub fn new(q: u32) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidInput("epsilon denominator must be positive".into()));
        }
        Ok(Epsilon { q })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn value(&self) -> Rational {
        rat(1, self.q as i64)
    }

    pub fn as_f64(&self) -> f64 {
        1.0 / self.q as f64
    }

    /// Largest `1/q'` not exceeding `x`.
    pub fn floor_of(x: f64) -> Result<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidInput(format!("cannot express {x} as 1/q")));
        }
        let mut q = (1.0 / x).ceil().max(1.0) as u32;
        while 1.0 / (q as f64) > x {
            q += 1;
        }
        Epsilon::new(q)
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1/{}", self.q)
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("epsilon must be written 1/q, got {s:?}"));
        let (p, q) = s.trim().split_once('/').ok_or_else(bad)?;
        if p.trim() != "1" {
            return Err(bad());
        }
        let q: u32 = q.trim().parse().map_err(|_| bad())?;
        Epsilon::new(q).map_err(|_| bad())
    }
}

/// Maps a family of rationals onto a common integer grid so hot loops can
/// run on `i128`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueScale {
    denom: BigInt,
}

impl ValueScale {
    pub fn new<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Self {
        let mut denom = BigInt::one();
        for v in values {
            denom = denom.lcm(v.denom());
        }
        ValueScale { denom }
    }

    pub fn units(&self, v: &Rational) -> Result<i128> {
        let scaled = v * Rational::from_integer(self.denom.clone());
        debug_assert!(scaled.is_integer());
        scaled.to_integer().to_i128().ok_or(Error::Overflow("values"))
    }

    pub fn to_rational(&self, units: i128) -> Rational {
        Rational::new(BigInt::from(units), self.denom.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats() {
        assert_eq!(parse_rational("6/4").unwrap(), rat(3, 2));
        assert_eq!(parse_rational("-7").unwrap(), int(-7));
        assert_eq!(format_rational(&rat(6, 4)), "3/2");
        assert_eq!(format_rational(&int(12)), "12");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("0.5").is_err());
    }

    #[test]
    fn epsilon_forms() {
        let e: Epsilon = "1/5".parse().unwrap();
        assert_eq!(e.q(), 5);
        assert!("2/5".parse::<Epsilon>().is_err());
        assert!("1/0".parse::<Epsilon>().is_err());
        assert_eq!(Epsilon::floor_of(2.0 / 35.0).unwrap().q(), 18);
        assert_eq!(Epsilon::floor_of(0.25).unwrap().q(), 4);
    }

    #[test]
    fn integer_sqrt() {
        assert_eq!(isqrt_floor(&int(144)).unwrap(), BigInt::from(12));
        assert_eq!(isqrt_floor(&rat(143, 1)).unwrap(), BigInt::from(11));
        assert!(isqrt_floor(&int(-1)).is_none());
    }

    #[test]
    fn value_scale_roundtrip() {
        let vals = [rat(1, 2), rat(2, 3), int(5)];
        let s = ValueScale::new(vals.iter());
        for v in &vals {
            assert_eq!(&s.to_rational(s.units(v).unwrap()), v);
        }
    }
}
