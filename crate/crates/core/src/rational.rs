//! Exact rational numbers with decimal text I/O.
//!
//! Values are read from finite decimal strings (`"-0.5"`, `"2.9"`, `"3"`) or
//! fractions (`"3/2"`). They are written back as decimals whenever the
//! denominator divides a power of ten and as `p/q` otherwise, so every value
//! round-trips exactly.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Arbitrary-precision rational, always in lowest terms with a positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(pub(crate) BigRational);

impl Rational {
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `numer / denom`; panics if `denom == 0`.
    pub fn new(numer: i64, denom: i64) -> Self {
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
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

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Parses a finite decimal or `p/q` fraction.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let t = text.trim();
        let bad = || Error::Value(format!("`{text}` is not a finite decimal"));
        if let Some((p, q)) = t.split_once('/') {
            let numer = parse_signed_digits(p).ok_or_else(bad)?;
            let denom = parse_signed_digits(q).ok_or_else(bad)?;
            if denom.is_zero() {
                return Err(Error::Value(format!("`{text}` has a zero denominator")));
            }
            return Ok(Rational(BigRational::new(numer, denom)));
        }
        let (negative, body) = match t.as_bytes().first() {
            Some(b'-') => (true, &t[1..]),
            Some(b'+') => (false, &t[1..]),
            _ => (false, t),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) || (body.contains('.') && frac_part.is_empty()) {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        let mut numer: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| bad())?
        };
        if negative {
            numer = -numer;
        }
        let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
        Ok(Rational(BigRational::new(numer, denom)))
    }

    /// Number of decimal places needed to write this value exactly, if finite.
    fn decimal_places(&self) -> Option<usize> {
        let mut d = self.0.denom().clone();
        let two = BigInt::from(2u32);
        let five = BigInt::from(5u32);
        let (mut twos, mut fives) = (0usize, 0usize);
        while d.is_even() {
            d /= &two;
            twos += 1;
        }
        while (&d % &five).is_zero() {
            d /= &five;
            fives += 1;
        }
        d.is_one().then_some(twos.max(fives))
    }
}

fn parse_signed_digits(s: &str) -> Option<BigInt> {
    let s = s.trim();
    let body = s.strip_prefix('-').or_else(|| s.strip_prefix('+')).unwrap_or(s);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(places) = self.decimal_places() else {
            return write!(f, "{}/{}", self.0.numer(), self.0.denom());
        };
        if places == 0 {
            return write!(f, "{}", self.0.numer());
        }
        let scale = num_traits::pow(BigInt::from(10u32), places);
        let scaled = (&self.0 * BigRational::from_integer(scale.clone())).to_integer();
        let sign = if scaled.is_negative() { "-" } else { "" };
        let mag = scaled.abs();
        let (int_part, frac_part) = mag.div_rem(&scale);
        write!(f, "{sign}{int_part}.{:0>width$}", frac_part.to_string(), width = places)
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Rational::parse(s)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl From<BigRational> for Rational {
    fn from(r: BigRational) -> Self {
        Rational(r)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Rational::parse(&text).map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        let mut acc = BigRational::zero();
        for r in iter {
            acc += &r.0;
        }
        Rational(acc)
    }
}

impl Sum<Rational> for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        let mut acc = BigRational::zero();
        for r in iter {
            acc += r.0;
        }
        Rational(acc)
    }
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        self.0.is_integer() && self.0.numer() == &BigInt::from(*other)
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.0.cmp(&BigRational::from_integer(BigInt::from(*other))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(Rational::parse("-0.5").unwrap(), Rational::new(-1, 2));
        assert_eq!(Rational::parse("2.9").unwrap(), Rational::new(29, 10));
        assert_eq!(Rational::parse("3").unwrap(), Rational::from_integer(3));
        assert_eq!(Rational::parse(".25").unwrap(), Rational::new(1, 4));
        assert_eq!(Rational::parse("3/6").unwrap(), Rational::new(1, 2));
        assert_eq!(Rational::parse("-0").unwrap(), Rational::zero());
    }

    #[test]
    fn rejects_non_decimals() {
        for bad in ["", "-", "1e3", "abc", "1.", "1/0", "0x10", "1.2.3", "NaN", "inf"] {
            assert!(matches!(Rational::parse(bad), Err(Error::Value(_))), "{bad}");
        }
    }

    #[test]
    fn formats_finite_decimals_and_fractions() {
        assert_eq!(Rational::new(3, 2).to_string(), "1.5");
        assert_eq!(Rational::new(-1, 20).to_string(), "-0.05");
        assert_eq!(Rational::new(1, 3).to_string(), "1/3");
        assert_eq!(Rational::new(-7, 6).to_string(), "-7/6");
        assert_eq!(Rational::from_integer(-4).to_string(), "-4");
        assert_eq!(Rational::new(29, 10).to_string(), "2.9");
    }

    #[test]
    fn lowest_terms_with_positive_denominator() {
        let r = Rational::new(4, -8);
        assert_eq!(r.numer(), &BigInt::from(-1));
        assert_eq!(r.denom(), &BigInt::from(2));
    }

    proptest! {
        #[test]
        fn decimal_text_round_trips(int in -10_000i64..10_000, frac in 0u32..100_000, places in 0usize..6) {
            let frac = frac % 10u32.pow(places as u32);
            let text = if places == 0 {
                int.to_string()
            } else {
                format!("{int}.{frac:0>places$}")
            };
            let r = Rational::parse(&text).unwrap();
            let again = Rational::parse(&r.to_string()).unwrap();
            prop_assert_eq!(r, again);
        }

        #[test]
        fn fraction_text_round_trips(p in -1000i64..1000, q in 1i64..1000) {
            let r = Rational::new(p, q);
            prop_assert_eq!(Rational::parse(&r.to_string()).unwrap(), r);
        }
    }
}
