//! Scalar abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::FftNum;

/// Floating point types the solvers run on (`f32`, `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + FftNum
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or intermediate into `Self`.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// `1 / (1 + e^d)` without overflow for large `|d|`.
#[inline]
pub fn logistic_complement<R: Real>(d: R) -> R {
    if d > R::zero() {
        let e = (-d).exp();
        e / (R::one() + e)
    } else {
        R::one() / (R::one() + d.exp())
    }
}

/// Max-norm of a slice, zero for an empty slice.
pub fn max_abs<R: Real>(xs: &[R]) -> R {
    xs.iter().fold(R::zero(), |m, &x| m.max(x.abs()))
}
