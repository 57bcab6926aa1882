//! Double-double scalar.
//!
//! Thin wrapper over [`twofloat::TwoFloat`]. Division and `recip` are
//! reimplemented: the upstream quotient forms `1 - b·(1/b)` without a fused
//! multiply-add, which throws away the low word and leaves the result with
//! only `f64` accuracy. Everything else delegates.

use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use twofloat::TwoFloat;

#[derive(Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble(pub TwoFloat);

impl DoubleDouble {
    pub fn hi(self) -> f64 {
        self.0.hi()
    }

    pub fn lo(self) -> f64 {
        self.0.lo()
    }

    fn wrap(t: TwoFloat) -> Self {
        DoubleDouble(t)
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DoubleDouble({:e} + {:e})", self.hi(), self.lo())
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, r: Self) -> Self {
        DoubleDouble(self.0 + r.0)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, r: Self) -> Self {
        DoubleDouble(self.0 - r.0)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, r: Self) -> Self {
        DoubleDouble(self.0 * r.0)
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    /// Long division: three `f64` quotient digits with exact residuals.
    fn div(self, r: Self) -> Self {
        let b = r.0;
        let q1 = self.0.hi() / b.hi();
        if !q1.is_finite() || q1 == 0.0 {
            return DoubleDouble(<TwoFloat as From<f64>>::from(q1));
        }
        let rem = self.0 - b * q1;
        let q2 = rem.hi() / b.hi();
        let rem = rem - b * q2;
        let q3 = rem.hi() / b.hi();
        DoubleDouble(TwoFloat::new_add(q1, q2) + q3)
    }
}

impl Rem for DoubleDouble {
    type Output = Self;
    fn rem(self, r: Self) -> Self {
        let q = (self / r).trunc();
        self - q * r
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        DoubleDouble(-self.0)
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, r: Self) {
        *self = *self + r;
    }
}

impl SubAssign for DoubleDouble {
    fn sub_assign(&mut self, r: Self) {
        *self = *self - r;
    }
}

impl MulAssign for DoubleDouble {
    fn mul_assign(&mut self, r: Self) {
        *self = *self * r;
    }
}

impl DivAssign for DoubleDouble {
    fn div_assign(&mut self, r: Self) {
        *self = *self / r;
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        DoubleDouble(<TwoFloat as From<f64>>::from(0.0))
    }

    fn is_zero(&self) -> bool {
        self.0.hi() == 0.0 && self.0.lo() == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        DoubleDouble(<TwoFloat as From<f64>>::from(1.0))
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = std::num::ParseFloatError;

    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        if radix != 10 {
            // Only decimal input is meaningful here; defer to the f64 error.
            "invalid radix".parse::<f64>()?;
        }
        Ok(DoubleDouble(<TwoFloat as From<f64>>::from(s.parse::<f64>()?)))
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
        TwoFloat::from_i64(n).map(DoubleDouble)
    }

    fn from_u64(n: u64) -> Option<Self> {
        TwoFloat::from_u64(n).map(DoubleDouble)
    }

    fn from_f64(n: f64) -> Option<Self> {
        Some(DoubleDouble(<TwoFloat as From<f64>>::from(n)))
    }
}

impl NumCast for DoubleDouble {
    fn from<T: ToPrimitive>(n: T) -> Option<Self> {
        n.to_f64().map(|v| DoubleDouble(<TwoFloat as From<f64>>::from(v)))
    }
}

macro_rules! unary {
    ($($name:ident),*) => {
        $(
            #[inline]
            fn $name(self) -> Self {
                Self::wrap(Float::$name(self.0))
            }
        )*
    };
}

macro_rules! predicate {
    ($($name:ident),*) => {
        $(
            #[inline]
            fn $name(self) -> bool {
                Float::$name(self.0)
            }
        )*
    };
}

macro_rules! constant {
    ($tr:ident: $($name:ident),*) => {
        $(
            #[inline]
            fn $name() -> Self {
                Self::wrap(<TwoFloat as $tr>::$name())
            }
        )*
    };
}

impl Float for DoubleDouble {
    constant!(Float: nan, infinity, neg_infinity, neg_zero, min_value, min_positive_value, max_value, epsilon);
    predicate!(is_nan, is_infinite, is_finite, is_normal, is_sign_positive, is_sign_negative);
    unary!(
        floor, ceil, round, trunc, fract, abs, signum, sqrt, exp, exp2, ln, log2, log10, cbrt, sin, cos, tan,
        asin, acos, atan, exp_m1, ln_1p, sinh, cosh, tanh, asinh, acosh, atanh
    );

    fn classify(self) -> FpCategory {
        Float::classify(self.0)
    }

    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }

    fn recip(self) -> Self {
        Self::one() / self
    }

    fn powi(self, n: i32) -> Self {
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        if n < 0 { acc.recip() } else { acc }
    }

    fn powf(self, n: Self) -> Self {
        Self::wrap(Float::powf(self.0, n.0))
    }

    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }

    fn max(self, other: Self) -> Self {
        if self >= other || other.is_nan() { self } else { other }
    }

    fn min(self, other: Self) -> Self {
        if self <= other || other.is_nan() { self } else { other }
    }

    fn abs_sub(self, other: Self) -> Self {
        if self > other { self - other } else { Self::zero() }
    }

    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt()
    }

    fn atan2(self, other: Self) -> Self {
        Self::wrap(Float::atan2(self.0, other.0))
    }

    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }

    fn integer_decode(self) -> (u64, i16, i8) {
        Float::integer_decode(self.0)
    }
}

impl FloatConst for DoubleDouble {
    constant!(
        FloatConst: E, FRAC_1_PI, FRAC_1_SQRT_2, FRAC_2_PI, FRAC_2_SQRT_PI, FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6,
        FRAC_PI_8, LN_10, LN_2, LOG10_E, LOG2_E, PI, SQRT_2
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd(x: f64) -> DoubleDouble {
        DoubleDouble::from_f64(x).unwrap()
    }

    #[test]
    fn division_keeps_low_word() {
        let third = dd(1.0) / dd(3.0);
        assert!(third.lo() != 0.0);
        let back = third * dd(3.0) - dd(1.0);
        assert!(back.abs().to_f64().unwrap() < 1e-31);
        let x = dd(2.0).sqrt() / dd(7.0);
        let y = x * dd(7.0) - dd(2.0).sqrt();
        assert!(y.abs().to_f64().unwrap() < 1e-30);
    }

    #[test]
    fn powi_and_recip() {
        let x = dd(1.1);
        let p = x.powi(-3) * x.powi(3) - dd(1.0);
        assert!(p.abs().to_f64().unwrap() < 1e-30);
    }
}
