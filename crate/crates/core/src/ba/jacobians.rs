use nalgebra::{Matrix2x3, Matrix2x6, RowVector3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{skew, Intrinsics, Pose};
use crate::plane::Plane;
use crate::scalar::Real;

/// Residual `e = x_obs - pi(p_c)` and its derivatives.
///
/// The pose block is with respect to the left-multiplicative increment
/// `(omega, v)` used by [`Pose::retract`]; the point block is with respect
/// to an additive world-frame increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprojLinearization<T: Real> {
    pub residual: Vector2<T>,
    pub d_pose: Matrix2x6<T>,
    pub d_point: Matrix2x3<T>,
}

/// Linearizes one reprojection factor. `x_offset` shifts the camera along
/// its own +x axis (the virtual right view uses the stereo baseline, the
/// left view 0).
pub fn linearize_reprojection<T: Real>(
    world_to_camera: &Pose<T>,
    point: &Vector3<T>,
    observed: &Vector2<T>,
    k: &Intrinsics<T>,
    x_offset: T,
) -> Result<ReprojLinearization<T>> {
    let q = world_to_camera.transform_point(point);
    let pc = Vector3::new(q.x - x_offset, q.y, q.z);
    if !(pc.z > T::zero()) {
        return Err(Error::BehindCamera {
            depth: pc.z.as_f64(),
        });
    }
    let iz = T::one() / pc.z;
    let iz2 = iz * iz;
    let residual = Vector2::new(
        observed.x - (k.fx * pc.x * iz + k.cx),
        observed.y - (k.fy * pc.y * iz + k.cy),
    );
    // de/dp_c = -dpi/dp_c
    let de_dpc = Matrix2x3::new(
        -k.fx * iz,
        T::zero(),
        k.fx * pc.x * iz2,
        T::zero(),
        -k.fy * iz,
        k.fy * pc.y * iz2,
    );
    // dp_c/d(omega) = -[q]x, dp_c/dv = I, dp_c/dX = R
    let d_omega = de_dpc * (-skew(&q));
    let mut d_pose = Matrix2x6::zeros();
    d_pose.fixed_view_mut::<2, 3>(0, 0).copy_from(&d_omega);
    d_pose.fixed_view_mut::<2, 3>(0, 3).copy_from(&de_dpc);
    let d_point = de_dpc * world_to_camera.rotation;
    Ok(ReprojLinearization {
        residual,
        d_pose,
        d_point,
    })
}

/// Normalized point-to-plane residual `r / sigma` and its point derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneLinearization<T: Real> {
    pub residual: T,
    pub d_point: RowVector3<T>,
}

pub fn linearize_plane<T: Real>(plane: &Plane<T>, point: &Vector3<T>, sigma: T) -> PlaneLinearization<T> {
    PlaneLinearization {
        residual: plane.signed_distance(point) / sigma,
        d_point: plane.normal.transpose() / sigma,
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector6;

    use super::*;
    use crate::plane::OrientationClass;

    fn setup() -> (Pose<f64>, Vector3<f64>, Vector2<f64>, Intrinsics<f64>) {
        let pose = Pose::from_rotation_vector(Vector3::new(0.1, -0.2, 0.05), Vector3::new(0.3, -0.1, 0.2));
        let x = Vector3::new(0.4, -0.3, 3.0);
        let k = Intrinsics::new(300.0, 310.0, 160.0, 120.0, 320, 240).unwrap();
        (pose, x, Vector2::new(170.0, 110.0), k)
    }

    #[test]
    fn pose_block_matches_central_differences() {
        let (pose, x, obs, k) = setup();
        for offset in [0.0, 0.1] {
            let lin = linearize_reprojection(&pose, &x, &obs, &k, offset).unwrap();
            let h = 1e-6;
            for j in 0..6 {
                let mut d = Vector6::zeros();
                d[j] = h;
                let ep = linearize_reprojection(&pose.retract(&d), &x, &obs, &k, offset).unwrap().residual;
                let em = linearize_reprojection(&pose.retract(&-d), &x, &obs, &k, offset).unwrap().residual;
                let fd = (ep - em) / (2.0 * h);
                let col = lin.d_pose.column(j);
                assert!((fd - col).norm() <= 1e-5 * col.norm().max(1.0), "column {j}");
            }
        }
    }

    #[test]
    fn point_block_matches_central_differences() {
        let (pose, x, obs, k) = setup();
        let lin = linearize_reprojection(&pose, &x, &obs, &k, 0.1).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut d = Vector3::zeros();
            d[j] = h;
            let ep = linearize_reprojection(&pose, &(x + d), &obs, &k, 0.1).unwrap().residual;
            let em = linearize_reprojection(&pose, &(x - d), &obs, &k, 0.1).unwrap().residual;
            let fd = (ep - em) / (2.0 * h);
            assert!((fd - lin.d_point.column(j)).norm() < 1e-5 * lin.d_point.column(j).norm().max(1.0));
        }
    }

    #[test]
    fn plane_gradient_is_normal_over_sigma() {
        let p = Plane::new(Vector3::new(1.0, 2.0, 2.0), 3.0, OrientationClass::General).unwrap();
        let lin = linearize_plane(&p, &Vector3::new(1.0, 0.0, 0.0), 0.5);
        assert!((lin.residual - (1.0_f64 / 3.0 + 1.0) / 0.5).abs() < 1e-12);
        assert!((lin.d_point - RowVector3::new(2.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0)).norm() < 1e-12);
    }

    #[test]
    fn behind_camera_is_an_error() {
        let (_, _, obs, k) = setup();
        let r = linearize_reprojection(&Pose::identity(), &Vector3::new(0.0, 0.0, -1.0), &obs, &k, 0.0);
        assert!(matches!(r, Err(Error::BehindCamera { .. })));
    }
}
