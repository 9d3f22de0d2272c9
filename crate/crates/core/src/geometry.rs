//! Camera model, rigid transforms, the robust kernel and the reprojection
//! residual.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Upper clamp applied to per-observation uncertainty.
pub const U_MAX: f64 = 0.99;

/// Default Huber threshold (standard 95%-efficiency constant).
pub const HUBER_DELTA: f64 = 1.345;

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics<T: Real> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> Intrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        let w = T::lit(width as f64);
        let h = T::lit(height as f64);
        if !(fx > T::zero() && fy > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive (fx={}, fy={})",
                fx.as_f64(),
                fy.as_f64()
            )));
        }
        if !(cx > T::zero() && cx < w && cy > T::zero() && cy < h) {
            return Err(Error::InvalidInput(format!(
                "principal point ({}, {}) outside {}x{} image",
                cx.as_f64(),
                cy.as_f64(),
                width,
                height
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Builds intrinsics without validating them. Used by tests that need
    /// the degenerate `cx = cy = 0` camera.
    pub fn new_unchecked(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize) -> Self {
        Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        }
    }

    pub fn matrix(&self) -> Matrix3<T> {
        let (z, o) = (T::zero(), T::one());
        Matrix3::new(self.fx, z, self.cx, z, self.fy, self.cy, z, z, o)
    }

    /// True when the pixel lies inside `[0, width) x [0, height)`.
    pub fn contains(&self, pixel: &Vector2<T>) -> bool {
        pixel.x >= T::zero()
            && pixel.y >= T::zero()
            && pixel.x < T::lit(self.width as f64)
            && pixel.y < T::lit(self.height as f64)
    }

    pub fn cast<U: Real>(&self) -> Intrinsics<U> {
        Intrinsics {
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            width: self.width,
            height: self.height,
        }
    }
}

/// Rigid transform `x -> R x + t`.
///
/// The direction (world to camera or camera to world) is fixed by the owner:
/// factor-graph nodes hold world-to-camera poses, depth frames and
/// trajectories hold camera-to-world poses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

fn orthonormal_tolerance<T: Real>() -> T {
    let eps = T::default_epsilon() * T::lit(100.0);
    if eps > T::lit(1e-9) {
        eps
    } else {
        T::lit(1e-9)
    }
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Checked constructor: `rotation` must be orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Result<Self> {
        let tol = orthonormal_tolerance::<T>();
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > tol || (rotation.determinant() - T::one()).abs() > tol {
            return Err(Error::InvalidInput(
                "rotation is not a proper orthonormal matrix".into(),
            ));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_rotation_vector(omega: Vector3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation: so3_exp(&omega),
            translation,
        }
    }

    pub fn from_quaternion(q: UnitQuaternion<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation: q.to_rotation_matrix().into_inner(),
            translation,
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<T> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    /// `R p + t`, evaluated row by row in a fixed operation order.
    #[inline]
    pub fn transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        let r = &self.rotation;
        let t = &self.translation;
        Vector3::new(
            r[(0, 0)] * p.x + r[(0, 1)] * p.y + r[(0, 2)] * p.z + t.x,
            r[(1, 0)] * p.x + r[(1, 1)] * p.y + r[(1, 2)] * p.z + t.y,
            r[(2, 0)] * p.x + r[(2, 1)] * p.y + r[(2, 2)] * p.z + t.z,
        )
    }

    #[inline]
    pub fn rotate(&self, v: &Vector3<T>) -> Vector3<T> {
        self.rotation * v
    }

    /// `self * other`: applies `other` first.
    pub fn compose(&self, other: &Pose<T>) -> Pose<T> {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose<T> {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Left-multiplicative update with a tangent increment `(omega, v)`:
    /// `R <- Exp(omega) R`, `t <- Exp(omega) t + v`.
    pub fn retract(&self, delta: &Vector6<T>) -> Pose<T> {
        let omega = Vector3::new(delta[0], delta[1], delta[2]);
        let v = Vector3::new(delta[3], delta[4], delta[5]);
        let exp = so3_exp(&omega);
        Pose {
            rotation: exp * self.rotation,
            translation: exp * self.translation + v,
        }
    }

    /// Projection center of a world-to-camera pose, in world coordinates.
    pub fn center(&self) -> Vector3<T> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn cast<U: Real>(&self) -> Pose<U> {
        Pose {
            rotation: self.rotation.map(|x| U::lit(x.as_f64())),
            translation: self.translation.map(|x| U::lit(x.as_f64())),
        }
    }
}

/// Exponential map of SO(3).
pub fn so3_exp<T: Real>(omega: &Vector3<T>) -> Matrix3<T> {
    Rotation3::new(*omega).into_inner()
}

/// Logarithm of SO(3); `rotation` must be orthonormal.
pub fn so3_log<T: Real>(rotation: &Matrix3<T>) -> Vector3<T> {
    Rotation3::from_matrix_unchecked(*rotation).scaled_axis()
}

pub fn skew<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

/// Unit "down" direction in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityVector<T: Real> {
    direction: Vector3<T>,
}

impl<T: Real> GravityVector<T> {
    /// Normalizes `v`; fails on a zero or non-finite vector.
    pub fn new(v: Vector3<T>) -> Result<Self> {
        let n = v.norm();
        if !(n > T::default_epsilon()) || !n.is_finite() {
            return Err(Error::InvalidInput("gravity vector has zero norm".into()));
        }
        Ok(Self { direction: v / n })
    }

    pub fn direction(&self) -> &Vector3<T> {
        &self.direction
    }

    /// Upward unit vector, `-direction`.
    pub fn up(&self) -> Vector3<T> {
        -self.direction
    }
}

/// 3D landmark with its fused surface normal.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint<T: Real> {
    pub id: u64,
    pub position: Vector3<T>,
    /// Unit normal in world coordinates, set by the first fusion.
    pub normal: Option<Vector3<T>>,
    /// Distance at the most recent fused observation.
    pub last_observed_distance: Option<T>,
}

impl<T: Real> MapPoint<T> {
    pub fn new(id: u64, position: Vector3<T>) -> Self {
        Self {
            id,
            position,
            normal: None,
            last_observed_distance: None,
        }
    }
}

/// Keypoint measurement of map point `point_id` in frame `frame_id`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T: Real> {
    pub frame_id: u64,
    pub point_id: u64,
    pub pixel: Vector2<T>,
    pub uncertainty_u: T,
}

/// Pinhole projection of a camera-frame point.
pub fn project<T: Real>(point: &Vector3<T>, k: &Intrinsics<T>) -> Result<Vector2<T>> {
    if !(point.z > T::zero()) {
        return Err(Error::BehindCamera {
            depth: point.z.as_f64(),
        });
    }
    Ok(Vector2::new(
        k.fx * point.x / point.z + k.cx,
        k.fy * point.y / point.z + k.cy,
    ))
}

/// Back-projects a pixel at the given z-depth into the camera frame.
pub fn unproject<T: Real>(pixel: &Vector2<T>, depth: T, k: &Intrinsics<T>) -> Result<Vector3<T>> {
    if !(depth > T::zero()) || !depth.is_finite() {
        return Err(Error::InvalidDepth(depth.as_f64()));
    }
    Ok(Vector3::new(
        depth * (pixel.x - k.cx) / k.fx,
        depth * (pixel.y - k.cy) / k.fy,
        depth,
    ))
}

/// `x_obs - project(T_cw X)`.
pub fn reprojection_residual<T: Real>(
    world_to_camera: &Pose<T>,
    point: &Vector3<T>,
    observed: &Vector2<T>,
    k: &Intrinsics<T>,
) -> Result<Vector2<T>> {
    let pc = world_to_camera.transform_point(point);
    Ok(observed - project(&pc, k)?)
}

/// Huber kernel applied to a squared energy `s`:
/// `s` for `s <= delta^2`, `2 delta sqrt(s) - delta^2` above.
pub fn huber<T: Real>(cost: T, delta: T) -> Result<T> {
    if cost < T::zero() || cost.as_f64().is_nan() {
        return Err(Error::Domain(format!(
            "huber expects a non-negative energy, got {}",
            cost.as_f64()
        )));
    }
    if !(delta > T::zero()) {
        return Err(Error::Domain(format!(
            "huber threshold must be positive, got {}",
            delta.as_f64()
        )));
    }
    Ok(huber_unchecked(cost, delta))
}

#[inline]
pub(crate) fn huber_unchecked<T: Real>(cost: T, delta: T) -> T {
    let d2 = delta * delta;
    if cost <= d2 {
        cost
    } else {
        T::lit(2.0) * delta * cost.sqrt() - d2
    }
}

/// Derivative of [`huber`] with respect to the energy; the IRLS weight.
#[inline]
pub fn huber_weight<T: Real>(cost: T, delta: T) -> T {
    if cost <= delta * delta {
        T::one()
    } else {
        delta / cost.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn unit_k() -> Intrinsics<f64> {
        Intrinsics::new_unchecked(1.0, 1.0, 0.0, 0.0, 10, 10)
    }

    #[test]
    fn project_optical_axis() {
        let p = project(&Vector3::new(0.0, 0.0, 1.0), &unit_k()).unwrap();
        assert_eq!(p, Vector2::new(0.0, 0.0));
    }

    #[test]
    fn project_closed_form() {
        let k = Intrinsics::new(100.0, 100.0, 50.0, 50.0, 200, 200).unwrap();
        let p = project(&Vector3::new(1.0, 2.0, 2.0), &k).unwrap();
        assert_eq!(p, Vector2::new(100.0, 150.0));
    }

    #[test]
    fn project_rejects_non_positive_depth() {
        let k = unit_k();
        assert!(matches!(
            project(&Vector3::new(0.0, 0.0, 0.0), &k),
            Err(Error::BehindCamera { .. })
        ));
        assert!(project(&Vector3::new(1.0, 0.0, -2.0), &k).is_err());
    }

    #[test]
    fn unproject_principal_point() {
        let k = Intrinsics::new(100.0, 120.0, 50.0, 40.0, 100, 80).unwrap();
        let p = unproject(&Vector2::new(50.0, 40.0), 3.0, &k).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, 3.0));
        let q = unproject(&Vector2::new(0.0, 0.0), 1.0, &unit_k()).unwrap();
        assert_eq!(q, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn unproject_rejects_bad_depth() {
        let k = unit_k();
        assert!(matches!(
            unproject(&Vector2::new(0.0, 0.0), 0.0, &k),
            Err(Error::InvalidDepth(_))
        ));
        assert!(unproject(&Vector2::new(0.0, 0.0), -1.0, &k).is_err());
        assert!(unproject(&Vector2::new(0.0, 0.0), f64::NAN, &k).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(Intrinsics::new(0.0, 1.0, 5.0, 5.0, 10, 10).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 10.0, 5.0, 10, 10).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 5.0, 5.0, 10, 10).is_ok());
    }

    #[test]
    fn residual_exact_and_shifted() {
        let k = Intrinsics::new(200.0, 200.0, 100.0, 80.0, 200, 160).unwrap();
        let pose = Pose::from_rotation_vector(
            Vector3::new(0.05, -0.02, 0.1),
            Vector3::new(0.1, 0.2, 0.3),
        );
        let x = Vector3::new(0.3, -0.1, 2.5);
        let obs = project(&pose.transform_point(&x), &k).unwrap();
        let r = reprojection_residual(&pose, &x, &obs, &k).unwrap();
        assert_eq!(r, Vector2::zeros());
        let shifted = obs + Vector2::new(1.0, 0.0);
        let r = reprojection_residual(&pose, &x, &shifted, &k).unwrap();
        assert!(close(r.x, 1.0, 1e-12) && close(r.y, 0.0, 1e-12));
    }

    #[test]
    fn residual_behind_camera_errors() {
        let k = unit_k();
        let r = reprojection_residual(
            &Pose::identity(),
            &Vector3::new(0.0, 0.0, -1.0),
            &Vector2::zeros(),
            &k,
        );
        assert!(matches!(r, Err(Error::BehindCamera { .. })));
    }

    #[test]
    fn huber_regimes() {
        let delta = HUBER_DELTA;
        assert_eq!(huber(0.0, delta).unwrap(), 0.0);
        assert!(close(huber(1e-3, delta).unwrap(), 1e-3, 1e-12));
        let at = 4.0 * delta * delta;
        let value = huber(at, delta).unwrap();
        // closed form: 2 delta sqrt(4 delta^2) - delta^2 = 3 delta^2
        assert!(close(value, 3.0 * delta * delta, 1e-12));
        assert!(value < at);
        assert!(huber(-1.0, delta).is_err());
        assert!(huber(1.0, 0.0).is_err());
    }

    #[test]
    fn huber_is_c1_at_threshold() {
        let delta = 0.7_f64;
        let d2 = delta * delta;
        let h = 1e-7;
        let left = (huber(d2, delta).unwrap() - huber(d2 - h, delta).unwrap()) / h;
        let right = (huber(d2 + h, delta).unwrap() - huber(d2, delta).unwrap()) / h;
        assert!(close(left, 1.0, 1e-6));
        assert!(close(right, 1.0, 1e-6));
        assert!(close(huber_weight(d2 * 4.0, delta), 0.5, 1e-15));
    }

    #[test]
    fn pose_checked_constructor() {
        let r = so3_exp(&Vector3::new(0.3, 0.2, -0.1));
        assert!(Pose::new(r, Vector3::zeros()).is_ok());
        assert!(Pose::new(r * 1.01, Vector3::zeros()).is_err());
        let mut reflect = Matrix3::identity();
        reflect[(2, 2)] = -1.0;
        assert!(Pose::new(reflect, Vector3::zeros()).is_err());
    }

    #[test]
    fn retract_zero_is_identity() {
        let pose = Pose::from_rotation_vector(Vector3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(pose.retract(&Vector6::zeros()), pose);
    }

    #[test]
    fn so3_log_inverts_exp() {
        let w = Vector3::new(0.4, -0.3, 0.2);
        assert!((so3_log(&so3_exp(&w)) - w).norm() < 1e-12);
    }

    #[test]
    fn gravity_normalizes() {
        let g = GravityVector::new(Vector3::new(0.0, 0.0, -9.81)).unwrap();
        assert_eq!(*g.direction(), Vector3::new(0.0, 0.0, -1.0));
        assert!(GravityVector::new(Vector3::<f64>::zeros()).is_err());
    }

    #[test]
    fn f32_projection_round_trip() {
        let k = Intrinsics::<f32>::new(300.0, 300.0, 160.0, 120.0, 320, 240).unwrap();
        let px = Vector2::new(37.25f32, 201.5);
        let p = unproject(&px, 2.5, &k).unwrap();
        let back = project(&p, &k).unwrap();
        assert!((back - px).norm() < 1e-3);
    }
}
