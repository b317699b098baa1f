//! Scalar abstraction shared by the numerical core.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the Bellman, mollifier and quadrature code is generic over.
///
/// Implemented for `f32` and `f64`. Model, verification and report code
/// works in `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + std::fmt::Display + std::fmt::LowerExp + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Machine epsilon of `T`, as `f64`.
#[inline]
pub fn epsilon<T: Real>() -> f64 {
    to_f64(T::default_epsilon())
}
