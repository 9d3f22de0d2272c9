use nalgebra::Matrix2;

use crate::geometry::U_MAX;
use crate::scalar::Real;

/// Clamps `u` into `[0, U_MAX]`; the flag reports whether clamping happened.
pub fn clamp_uncertainty<T: Real>(u: T) -> (T, bool) {
    let max = T::lit(U_MAX);
    if u.as_f64().is_nan() {
        (max, true)
    } else if u < T::zero() {
        (T::zero(), true)
    } else if u > max {
        (max, true)
    } else {
        (u, false)
    }
}

/// Information matrix `(1 - u) I` attached to a keypoint with uncertainty `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyInformation<T: Real> {
    /// Scalar `1 - u` after clamping.
    pub weight: T,
    pub clamped: bool,
}

impl<T: Real> UncertaintyInformation<T> {
    pub fn matrix(&self) -> Matrix2<T> {
        Matrix2::identity() * self.weight
    }
}

pub fn information_from_uncertainty<T: Real>(u: T) -> UncertaintyInformation<T> {
    let (u, clamped) = clamp_uncertainty(u);
    UncertaintyInformation {
        weight: T::one() - u,
        clamped,
    }
}
