use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Intrinsics;

/// Planar rectangle `origin + s u + t v`, `s, t` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneRect {
    pub origin: [f64; 3],
    pub axis_u: [f64; 3],
    pub axis_v: [f64; 3],
}

impl PlaneRect {
    pub fn origin(&self) -> Vector3<f64> {
        Vector3::from(self.origin)
    }

    pub fn u(&self) -> Vector3<f64> {
        Vector3::from(self.axis_u)
    }

    pub fn v(&self) -> Vector3<f64> {
        Vector3::from(self.axis_v)
    }

    /// Unit normal `u x v`.
    pub fn normal(&self) -> Vector3<f64> {
        self.u().cross(&self.v()).normalize()
    }

    /// Offset `d` of `n . X + d = 0`.
    pub fn offset(&self) -> f64 {
        -self.normal().dot(&self.origin())
    }

    /// Rectangle coordinates `(s, t)` of a point on the plane.
    pub fn coords(&self, p: &Vector3<f64>) -> (f64, f64) {
        let r = p - self.origin();
        (r.dot(&self.u()) / self.u().norm_squared(), r.dot(&self.v()) / self.v().norm_squared())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterSpec {
    /// Fraction of all map points that are clutter.
    pub fraction: f64,
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Splat radius used when rendering clutter into depth maps, pixels.
    pub splat_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub waypoints: Vec<[f64; 3]>,
    /// One look-at target per waypoint, interpolated the same way.
    pub look_at: Vec<[f64; 3]>,
    pub frames: usize,
    pub frame_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Virtual stereo baseline, meters.
    pub baseline: f64,
}

impl CameraSpec {
    pub fn intrinsics(&self) -> Result<Intrinsics<f64>> {
        Intrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }
}

/// How the emitted uncertainty relates to the injected noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMode {
    /// `1 - u` is the ratio of the minimum to the actual noise variance.
    #[default]
    Correlated,
    /// Same marginal distribution, drawn from an independent field.
    Uncorrelated,
    /// `u = 0` everywhere.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Keypoint noise in the cleanest image regions, pixels.
    pub pixel_sigma: f64,
    /// Multiplicative depth noise in the cleanest regions.
    pub depth_sigma: f64,
    /// Global depth scale bias `s`: emitted depth is `s` times the truth.
    pub depth_scale: f64,
    pub uncertainty_mode: UncertaintyMode,
    /// Ratio between the noisiest and the cleanest noise level.
    pub noise_ratio: f64,
    /// Correlation length of the noise-level field, pixels.
    pub level_cell: f64,
    /// Shift of the noise-level field: larger values leave a smaller part
    /// of each image in the noisy regime.
    pub level_bias: f64,
    /// Correlation length of the depth error field, pixels.
    pub depth_cell: f64,
    /// Angular error applied to the gravity measurement, degrees.
    pub gravity_error_deg: f64,
    /// Per-frame odometry drift of the initial pose estimates.
    pub odometry_translation_sigma: f64,
    pub odometry_rotation_sigma_deg: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            pixel_sigma: 0.0,
            depth_sigma: 0.0,
            depth_scale: 1.0,
            uncertainty_mode: UncertaintyMode::Zero,
            noise_ratio: 1.0,
            level_cell: 80.0,
            level_bias: 1.5,
            depth_cell: 16.0,
            gravity_error_deg: 0.0,
            odometry_translation_sigma: 0.0,
            odometry_rotation_sigma_deg: 0.0,
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pixel_sigma: 1.0,
            depth_sigma: 0.02,
            depth_scale: 1.0,
            uncertainty_mode: UncertaintyMode::Correlated,
            noise_ratio: 8.0,
            level_cell: 80.0,
            level_bias: 1.5,
            depth_cell: 16.0,
            gravity_error_deg: 0.2,
            odometry_translation_sigma: 0.005,
            odometry_rotation_sigma_deg: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub planes: Vec<PlaneRect>,
    pub points_per_plane: usize,
    pub clutter: ClutterSpec,
    pub trajectory: TrajectorySpec,
    pub camera: CameraSpec,
    pub noise: NoiseModel,
    pub gravity: [f64; 3],
    pub seed: u64,
}

impl SceneSpec {
    /// Floor and two orthogonal walls of a 4 x 4 x 3 m room, seen by a camera
    /// sweeping in front of the corner.
    pub fn default_room() -> Self {
        Self {
            planes: vec![
                PlaneRect {
                    origin: [0.0, 0.0, 0.0],
                    axis_u: [4.0, 0.0, 0.0],
                    axis_v: [0.0, 4.0, 0.0],
                },
                PlaneRect {
                    origin: [4.0, 0.0, 0.0],
                    axis_u: [0.0, 4.0, 0.0],
                    axis_v: [0.0, 0.0, 3.0],
                },
                PlaneRect {
                    origin: [0.0, 4.0, 0.0],
                    axis_u: [0.0, 0.0, 3.0],
                    axis_v: [4.0, 0.0, 0.0],
                },
            ],
            points_per_plane: 120,
            clutter: ClutterSpec {
                fraction: 0.3,
                min: [1.8, 1.8, 0.2],
                max: [3.6, 3.6, 1.6],
                splat_radius: 4.0,
            },
            trajectory: TrajectorySpec {
                waypoints: vec![
                    [0.7, 1.9, 1.5],
                    [0.9, 1.2, 1.6],
                    [1.3, 0.8, 1.4],
                    [1.9, 0.7, 1.5],
                    [1.4, 1.1, 1.7],
                ],
                look_at: vec![
                    [3.3, 3.5, 0.8],
                    [3.5, 3.4, 0.9],
                    [3.5, 3.3, 0.8],
                    [3.4, 3.5, 0.7],
                    [3.4, 3.4, 0.9],
                ],
                frames: 90,
                frame_rate: 20.0,
            },
            camera: CameraSpec {
                fx: 250.0,
                fy: 250.0,
                cx: 159.5,
                cy: 119.5,
                width: 320,
                height: 240,
                baseline: 0.1,
            },
            noise: NoiseModel::default(),
            gravity: [0.0, 0.0, -1.0],
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.intrinsics()?;
        if self.planes.is_empty() {
            return Err(Error::InvalidInput("scene has no planes".into()));
        }
        for p in &self.planes {
            if !(p.u().cross(&p.v()).norm() > 1e-9) {
                return Err(Error::InvalidInput("degenerate plane rectangle".into()));
            }
        }
        let t = &self.trajectory;
        if t.waypoints.len() < 2 || t.waypoints.len() != t.look_at.len() {
            return Err(Error::InvalidInput(
                "trajectory needs at least two waypoints and one target per waypoint".into(),
            ));
        }
        if t.frames == 0 || !(t.frame_rate > 0.0) {
            return Err(Error::InvalidInput("trajectory needs frames and a positive rate".into()));
        }
        if !(0.0..1.0).contains(&self.clutter.fraction) {
            return Err(Error::InvalidInput("clutter fraction must lie in [0, 1)".into()));
        }
        let n = &self.noise;
        if !(n.depth_scale > 0.0) || n.noise_ratio < 1.0 || n.pixel_sigma < 0.0 || n.depth_sigma < 0.0 {
            return Err(Error::InvalidInput("invalid noise model".into()));
        }
        if !(n.level_cell > 0.0 && n.depth_cell > 0.0) {
            return Err(Error::InvalidInput("noise cell sizes must be positive".into()));
        }
        if !(Vector3::from(self.gravity).norm() > 0.0) {
            return Err(Error::InvalidInput("gravity must be non-zero".into()));
        }
        Ok(())
    }

    pub fn clutter_count(&self) -> usize {
        let plane_points = (self.planes.len() * self.points_per_plane) as f64;
        let f = self.clutter.fraction;
        (plane_points * f / (1.0 - f)).round() as usize
    }
}
