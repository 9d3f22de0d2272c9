use nalgebra::Vector3;

use super::frame::DepthFrame;
use crate::geometry::project;
use crate::scalar::Real;

/// Minimum number of visible map points for a scale estimate.
pub const MIN_SCALE_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    /// Arithmetic mean of the per-point ratios.
    #[default]
    Mean,
    /// Median of the ratios, for robustness experiments.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleCorrection<T: Real> {
    pub factor: T,
    pub sample_count: usize,
    /// False when too few samples were available and the factor stayed 1.
    pub applied: bool,
}

impl<T: Real> ScaleCorrection<T> {
    pub fn identity() -> Self {
        Self {
            factor: T::one(),
            sample_count: 0,
            applied: false,
        }
    }
}

/// Global scale between map-point depths and the predicted depth map.
///
/// Every world point is moved into the camera, projected, and the ratio of
/// its camera depth to the predicted depth at that pixel is averaged. Points
/// behind the camera, outside the image or over invalid depth are skipped.
pub fn scale_correction<T: Real>(
    frame: &DepthFrame<T>,
    points: &[Vector3<T>],
    min_samples: usize,
    mode: ScaleMode,
) -> ScaleCorrection<T> {
    let world_to_camera = frame.pose.inverse();
    let mut ratios: Vec<T> = points
        .iter()
        .filter_map(|p| {
            let pc = world_to_camera.transform_point(p);
            let px = project(&pc, &frame.intrinsics).ok()?;
            let predicted = frame.sample_depth(&px)?;
            Some(pc.z / predicted)
        })
        .collect();
    let n = ratios.len();
    if n < min_samples.max(1) {
        return ScaleCorrection {
            factor: T::one(),
            sample_count: n,
            applied: false,
        };
    }
    let factor = match mode {
        ScaleMode::Mean => {
            ratios.iter().fold(T::zero(), |acc, &r| acc + r) / T::lit(n as f64)
        }
        ScaleMode::Median => {
            ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
            if n % 2 == 1 {
                ratios[n / 2]
            } else {
                (ratios[n / 2 - 1] + ratios[n / 2]) * T::lit(0.5)
            }
        }
    };
    ScaleCorrection {
        factor,
        sample_count: n,
        applied: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::Grid;
    use crate::geometry::{Intrinsics, Pose};
    use nalgebra::Vector2;

    fn wall_frame(depth_scale: f64) -> (DepthFrame<f64>, Vec<Vector3<f64>>) {
        let k = Intrinsics::new(100.0, 100.0, 40.0, 30.0, 80, 60).unwrap();
        let depth = Grid::filled(80, 60, 3.0 * depth_scale);
        let f = DepthFrame::new(0, depth, Grid::filled(80, 60, 0.0), Pose::identity(), k).unwrap();
        let pts = (0..40)
            .map(|i| {
                let px = Vector2::new(5.0 + (i % 8) as f64 * 9.0, 5.0 + (i / 8) as f64 * 10.0);
                crate::geometry::unproject(&px, 3.0, &k).unwrap()
            })
            .collect();
        (f, pts)
    }

    #[test]
    fn identity_when_depths_agree() {
        let (f, pts) = wall_frame(1.0);
        let s = scale_correction(&f, &pts, MIN_SCALE_SAMPLES, ScaleMode::Mean);
        assert!(s.applied);
        assert_eq!(s.sample_count, 40);
        assert!((s.factor - 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_depth_gives_factor_two() {
        let (f, pts) = wall_frame(0.5);
        let s = scale_correction(&f, &pts, MIN_SCALE_SAMPLES, ScaleMode::Mean);
        assert!((s.factor - 2.0).abs() < 1e-12);
        let m = scale_correction(&f, &pts, MIN_SCALE_SAMPLES, ScaleMode::Median);
        assert!((m.factor - 2.0).abs() < 1e-12);
        let corrected = f.scaled(s.factor);
        assert!((corrected.depth.get(3, 3) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples_keeps_unit_factor() {
        let (f, pts) = wall_frame(0.5);
        let s = scale_correction(&f, &pts[..5], MIN_SCALE_SAMPLES, ScaleMode::Mean);
        assert!(!s.applied);
        assert_eq!(s.factor, 1.0);
        assert_eq!(s.sample_count, 5);
    }

    #[test]
    fn equivariant_under_depth_scaling() {
        let (f, pts) = wall_frame(1.0);
        let base = scale_correction(&f, &pts, 1, ScaleMode::Mean).factor;
        for c in [0.25, 0.8, 3.0] {
            let s = scale_correction(&f.scaled(c), &pts, 1, ScaleMode::Mean).factor;
            assert!((s - base / c).abs() < 1e-12);
        }
    }
}
