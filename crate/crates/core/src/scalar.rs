//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the solver can run on: `f32` or `f64`.
///
/// The FFT bound comes from the high-pass operator; the serde bounds let
/// solver outputs be written to JSON without extra wrapper types.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant not representable")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count not representable")
    }

    /// Lossy view as `f64`, used for error payloads and reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Slack used when checking that kernel taps sum to one.
    ///
    /// `1e-12` for `f64`; a few ulps per tap for coarser types.
    #[inline]
    fn simplex_tolerance(len: usize) -> Self {
        let ulps = Self::epsilon() * Self::of_usize(4 * len.max(1));
        ulps.max(Self::lit(1e-12))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `|x|^q` with the zero case pinned to zero, so non-integer exponents never
/// hit `ln(0)`.
#[inline]
pub(crate) fn abs_pow<T: Scalar>(x: T, q: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x.abs().powf(q)
    }
}

/// Sign with `sign(0) = 0`.
#[inline]
pub(crate) fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_pow_zero_is_zero() {
        assert_eq!(abs_pow(0.0_f64, 0.75), 0.0);
        assert_eq!(abs_pow(-2.0_f64, 2.0), 4.0);
    }

    #[test]
    fn sign_of_zero() {
        assert_eq!(sign(0.0_f32), 0.0);
        assert_eq!(sign(-0.0_f64), 0.0);
        assert_eq!(sign(-3.0_f64), -1.0);
    }

    #[test]
    fn simplex_tolerance_per_type() {
        assert_eq!(f64::simplex_tolerance(21), 1e-12);
        assert!(f32::simplex_tolerance(21) > 1e-6);
    }
}
