//! Scalar abstraction shared by the exact-moment and linear-algebra code.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use crate::ext::DoubleDouble;

/// Floating type usable by the moment, Galerkin and eigen-solver code.
///
/// `roundoff` is the unit roundoff of the format. It is needed because some
/// implementations (`TwoFloat`, hence [`DoubleDouble`]) report
/// `Float::epsilon` as the smallest positive normal number.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    fn roundoff() -> f64;

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable")
    }

    #[inline]
    fn to64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    fn roundoff() -> f64 {
        f32::EPSILON as f64
    }
}

impl Real for f64 {
    fn roundoff() -> f64 {
        f64::EPSILON
    }
}

impl Real for DoubleDouble {
    fn roundoff() -> f64 {
        // 2^-104: two 53-bit significands.
        4.930380657631324e-32
    }
}

/// Sum an iterator of `T` without requiring `std::iter::Sum`.
pub fn sum<T: Real>(it: impl IntoIterator<Item = T>) -> T {
    it.into_iter().fold(T::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twofloat_carries_extra_digits() {
        let third = DoubleDouble::of(1.0) / DoubleDouble::of(3.0);
        let back = third * DoubleDouble::of(3.0) - DoubleDouble::of(1.0);
        assert!(back.abs().to64() < 1e-30);
        let r = DoubleDouble::of(2.0).sqrt();
        assert!((r * r - DoubleDouble::of(2.0)).abs().to64() < 1e-30);
    }

    #[test]
    fn roundoff_ordering() {
        assert!(<DoubleDouble as Real>::roundoff() < <f64 as Real>::roundoff());
        assert!(<f64 as Real>::roundoff() < <f32 as Real>::roundoff());
    }
}
