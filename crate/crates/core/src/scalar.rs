//! Scalar abstraction shared by every numeric kernel in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the geometry, plane and solver kernels.
///
/// Implemented for `f32` and `f64`. All constants enter the kernels through
/// [`Real::lit`], so the same code path runs at either precision.
pub trait Real:
    RealField + Copy + Default + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal is representable")
    }

    /// Lossy conversion back to `f64` for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Quiet NaN, used as the invalid marker in depth grids.
    #[inline]
    fn nan() -> Self {
        Self::lit(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
