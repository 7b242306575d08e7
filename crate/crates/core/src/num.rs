//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the pipeline is generic over. Implemented for `f32` and `f64`.
pub trait Float:
    num_traits::Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Relative tolerance that is meaningful for this precision.
    fn solver_eps() -> Self;
}

impl Float for f32 {
    fn solver_eps() -> Self {
        1e-6
    }
}

impl Float for f64 {
    fn solver_eps() -> Self {
        1e-12
    }
}

/// Converts an `f64` literal into the scalar type.
#[inline]
pub fn cast<F: Float>(x: f64) -> F {
    F::from_f64(x).expect("f64 is representable in every Float")
}

#[inline]
pub fn to_f64<F: Float>(x: F) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
