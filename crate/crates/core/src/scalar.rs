//! Scalar abstraction shared by the math modules.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Implemented automatically for every type meeting the bounds.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {
    /// Converts an `f64` literal; panics only for types that cannot represent it.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable in scalar type")
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl<T> Real for T where T: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {}

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;
