use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

use super::Trajectory;

const STAMP_TOL: f64 = 1e-6;

/// Least-squares rotation and translation with `R a_i + t ~ b_i` (no scale).
pub fn align_rigid(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(Error::NotEnoughSamples {
            needed: 3,
            got: a.len().min(b.len()),
        });
    }
    let n = a.len() as f64;
    let ca = a.iter().sum::<Vector3<f64>>() / n;
    let cb = b.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (p, q) in a.iter().zip(b) {
        h += (q - cb) * (p - ca).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * vt;
    Ok((r, cb - r * ca))
}

/// RMSE of camera positions after rigid alignment of `estimated` onto
/// `truth`. Poses are matched by timestamp.
pub fn ate_rmse(estimated: &Trajectory, truth: &Trajectory) -> Result<f64> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut j = 0;
    for (t, pose) in estimated {
        while j < truth.len() && truth[j].0 < t - STAMP_TOL {
            j += 1;
        }
        if j < truth.len() && (truth[j].0 - t).abs() <= STAMP_TOL {
            a.push(pose.translation);
            b.push(truth[j].1.translation);
        }
    }
    let (r, t) = align_rigid(&a, &b)?;
    let sq: f64 = a.iter().zip(&b).map(|(p, q)| (r * p + t - q).norm_squared()).sum();
    Ok((sq / a.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::geometry::Pose;

    fn circle(n: usize) -> Trajectory {
        (0..n)
            .map(|i| {
                let a = i as f64 * 0.05;
                (i as f64 * 0.1, Pose::from_rotation_vector(Vector3::new(0.0, 0.0, a), Vector3::new(a.cos(), a.sin(), 0.1 * a)))
            })
            .collect()
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let t = circle(50);
        assert!(ate_rmse(&t, &t).unwrap() < 1e-12);
    }

    #[test]
    fn rigid_motion_is_aligned_away() {
        let t = circle(50);
        let g = Pose::from_rotation_vector(Vector3::new(0.3, -0.2, 1.0), Vector3::new(2.0, -1.0, 0.5));
        let moved: Trajectory = t.iter().map(|(s, p)| (*s, g.compose(p))).collect();
        assert!(ate_rmse(&moved, &t).unwrap() < 1e-9);
    }

    #[test]
    fn too_few_poses_is_an_error() {
        let t = circle(2);
        assert!(ate_rmse(&t, &t).is_err());
        let other: Trajectory = circle(10).into_iter().map(|(s, p)| (s + 0.05, p)).collect();
        assert!(ate_rmse(&other, &circle(10)).is_err());
    }

    #[test]
    fn gaussian_noise_gives_sigma_sqrt3() {
        let t = circle(500);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sigma = 0.01;
        let noisy: Trajectory = t
            .iter()
            .map(|(s, p)| {
                let d = Vector3::from_fn(|_, _| sigma * rng.sample::<f64, _>(StandardNormal));
                (*s, Pose { translation: p.translation + d, ..*p })
            })
            .collect();
        let e = ate_rmse(&noisy, &t).unwrap();
        let expect = sigma * 3f64.sqrt();
        assert!((e - expect).abs() < 0.1 * expect, "{e} vs {expect}");
    }
}
