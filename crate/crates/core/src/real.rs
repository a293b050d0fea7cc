//! Scalar abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar the solvers are written against: `f32` or `f64`.
///
/// The tolerance hooks let structural checks scale with the precision of the
/// type instead of hard-coding `f64` thresholds.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Tolerance for invariants of exact constructions (row sums, pmfs).
    fn structural_tol() -> Self;

    /// Tolerance for invariants that hold after a matrix exponential.
    fn propagated_tol() -> Self;

    /// Convert an `f64` literal. Never fails for finite input.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f64 {
    fn structural_tol() -> Self {
        1e-12
    }

    fn propagated_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn structural_tol() -> Self {
        1e-5
    }

    fn propagated_tol() -> Self {
        1e-4
    }
}

/// `max(0, v)`.
#[inline]
pub(crate) fn pos<T: Real>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

#[inline]
pub(crate) fn clamp<T: Real>(v: T, lo: T, hi: T) -> T {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}
