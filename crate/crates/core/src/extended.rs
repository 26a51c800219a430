//! Double-double scalar (about 32 significant digits) for reference
//! evaluations.
//!
//! The finite-difference oracle evaluates objectives in this type: with a
//! fixed step of 1e-5, an `f64` objective of size ~1 already carries ~1e-11
//! of cancellation noise into every difference quotient, which swamps small
//! gradient entries.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::num::FpCategory;
use std::ops::{
    Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign,
};

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use twofloat::consts::LN_2;
use twofloat::TwoFloat;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleDouble(pub TwoFloat);

// twofloat stores infinities with an infinite low word as well, and its
// ordering then claims `0.2 > -inf` is false. Compare by words instead.
impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.0.hi().partial_cmp(&other.0.hi())? {
            Ordering::Equal if self.0.hi().is_finite() => self.0.lo().partial_cmp(&other.0.lo()),
            ord => Some(ord),
        }
    }
}

impl PartialEq for DoubleDouble {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl DoubleDouble {
    pub fn new(x: f64) -> Self {
        Self(<TwoFloat as From<f64>>::from(x))
    }

    /// High word: the nearest `f64`.
    pub fn hi(self) -> f64 {
        self.0.hi()
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

macro_rules! binary_ops {
    ($($tr:ident $m:ident $atr:ident $am:ident),*) => {$(
        impl $tr for DoubleDouble {
            type Output = Self;
            fn $m(self, rhs: Self) -> Self {
                Self(self.0.$m(rhs.0))
            }
        }
        impl $atr for DoubleDouble {
            fn $am(&mut self, rhs: Self) {
                self.0.$am(rhs.0)
            }
        }
    )*};
}

binary_ops!(
    Add add AddAssign add_assign,
    Sub sub SubAssign sub_assign,
    Mul mul MulAssign mul_assign,
    Rem rem RemAssign rem_assign
);

// twofloat's own TwoFloat / TwoFloat forms `1 - b.hi * (1 / b.hi)` without
// an fma, which rounds to zero for divisors like 3, leaving an f64-accurate
// quotient. Long division with exact products instead.
fn div_dd(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

// twofloat's exp and ln are only good to ~1e-18 and ~1e-14. Reduce by ln 2
// and 2^10, sum the Taylor series, then square back up.
fn exp_dd(x: TwoFloat) -> TwoFloat {
    let hi = x.hi();
    if !hi.is_finite() || hi.abs() > 700.0 {
        return TwoFloat::from_f64(hi.exp());
    }
    let k = (hi / std::f64::consts::LN_2).round();
    let r = (x - LN_2 * k) * (1.0 / 1024.0);
    let mut term = r;
    let mut sum = r;
    for n in 2..=12 {
        term = term * r / n as f64;
        sum += term;
    }
    // sum holds exp(r) - 1; (1 + s)^2 - 1 = s (2 + s) keeps the small part exact.
    for _ in 0..10 {
        sum = sum * (sum + 2.0);
    }
    (sum + 1.0) * 2f64.powi(k as i32)
}

fn ln_dd(x: TwoFloat) -> TwoFloat {
    let hi = x.hi();
    if !hi.is_finite() || hi <= 0.0 {
        return TwoFloat::from_f64(hi.ln());
    }
    let y = TwoFloat::from_f64(hi.ln());
    y + x * exp_dd(-y) - 1.0
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self(div_dd(self.0, rhs.0))
    }
}

impl DivAssign for DoubleDouble {
    fn div_assign(&mut self, rhs: Self) {
        *self = *self / rhs;
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a DoubleDouble> for DoubleDouble {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + *b)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        Self(<TwoFloat as From<f64>>::from(0.0))
    }
    fn is_zero(&self) -> bool {
        self.0 == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        Self(<TwoFloat as From<f64>>::from(1.0))
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = <TwoFloat as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        TwoFloat::from_str_radix(s, radix).map(Self)
    }
}

impl ToPrimitive for DoubleDouble {
    fn to_i64(&self) -> Option<i64> {
        self.0.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.0.hi() + self.0.lo())
    }
}

impl FromPrimitive for DoubleDouble {
    fn from_i64(n: i64) -> Option<Self> {
        TwoFloat::from_i64(n).map(Self)
    }
    fn from_u64(n: u64) -> Option<Self> {
        TwoFloat::from_u64(n).map(Self)
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Self::new(n))
    }
}

impl NumCast for DoubleDouble {
    fn from<T: ToPrimitive>(n: T) -> Option<Self> {
        <TwoFloat as NumCast>::from(n).map(Self)
    }
}

macro_rules! unary {
    ($($m:ident),*) => {$(
        fn $m(self) -> Self {
            Self(Float::$m(self.0))
        }
    )*};
}

macro_rules! binary {
    ($($m:ident),*) => {$(
        fn $m(self, other: Self) -> Self {
            Self(Float::$m(self.0, other.0))
        }
    )*};
}

macro_rules! predicate {
    ($($m:ident),*) => {$(
        fn $m(self) -> bool {
            Float::$m(self.0)
        }
    )*};
}

macro_rules! constant {
    ($($m:ident),*) => {$(
        fn $m() -> Self {
            Self(<TwoFloat as Float>::$m())
        }
    )*};
}

impl Float for DoubleDouble {
    constant!(
        nan,
        infinity,
        neg_infinity,
        neg_zero,
        min_value,
        min_positive_value,
        max_value
    );
    predicate!(
        is_nan,
        is_infinite,
        is_finite,
        is_normal,
        is_sign_positive,
        is_sign_negative
    );
    unary!(
        floor, ceil, round, trunc, fract, abs, signum, sqrt, exp2, log2, log10, cbrt, sin, cos,
        tan, asin, acos, atan, exp_m1, ln_1p, sinh, cosh, tanh, asinh, acosh, atanh
    );
    binary!(powf, log, max, min, abs_sub, hypot, atan2);

    /// Two words of 53 bits: 2^-104.
    fn epsilon() -> Self {
        Self::new(2f64.powi(-104))
    }

    fn exp(self) -> Self {
        Self(exp_dd(self.0))
    }

    fn ln(self) -> Self {
        Self(ln_dd(self.0))
    }

    fn recip(self) -> Self {
        Self::one() / self
    }

    fn classify(self) -> FpCategory {
        self.0.classify()
    }

    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }

    fn powi(self, n: i32) -> Self {
        Self(self.0.powi(n))
    }

    fn sin_cos(self) -> (Self, Self) {
        let (s, c) = self.0.sin_cos();
        (Self(s), Self(c))
    }

    fn integer_decode(self) -> (u64, i16, i8) {
        self.0.hi().integer_decode()
    }
}

impl ScalarOperand for DoubleDouble {}

/// Serialized as the nearest `f64`.
impl Serialize for DoubleDouble {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64().unwrap_or(f64::NAN))
    }
}

impl<'de> Deserialize<'de> for DoubleDouble {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Self::new)
    }
}

impl Scalar for DoubleDouble {}

impl DoubleDouble {
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carries_more_than_f64_precision() {
        let one = DoubleDouble::one();
        let tiny = DoubleDouble::new(1e-20);
        assert!((one + tiny) - one == tiny);
        let third = one / DoubleDouble::new(3.0);
        let residual = third * DoubleDouble::new(3.0) - one;
        assert!(residual.abs().hi() < 1e-30);
        let seventh = DoubleDouble::new(7.0).recip();
        assert!((seventh * DoubleDouble::new(7.0) - one).abs().hi() < 1e-30);
    }

    #[test]
    fn exp_and_ln_round_trip() {
        let x = DoubleDouble::new(0.7) / DoubleDouble::new(3.0);
        let back = x.exp().ln();
        assert!((back - x).abs().hi() < 1e-30);
        // e and ln 2 to 32 digits.
        let e = DoubleDouble::one().exp();
        assert!((e - DoubleDouble(twofloat::consts::E)).abs().hi() < 1e-30);
        let ln2 = DoubleDouble::new(2.0).ln();
        assert!((ln2 - DoubleDouble(LN_2)).abs().hi() < 1e-30);
        let big = DoubleDouble::new(-37.25).exp() * DoubleDouble::new(37.25).exp();
        assert!((big - DoubleDouble::one()).abs().hi() < 1e-29);
    }

    #[test]
    fn orders_against_infinities() {
        let x = DoubleDouble::new(0.2);
        assert!(x > DoubleDouble::neg_infinity());
        assert!(x < DoubleDouble::infinity());
        assert!(DoubleDouble::new(1.0) + DoubleDouble::new(1e-20) > DoubleDouble::new(1.0));
        assert!(DoubleDouble::nan().partial_cmp(&x).is_none());
    }

    #[test]
    fn epsilon_is_double_double() {
        assert!(DoubleDouble::epsilon().hi() < 1e-30);
    }
}
