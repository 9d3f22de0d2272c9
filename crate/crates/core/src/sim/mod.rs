//! Synthetic planar rooms with ground truth: trajectories, keypoint
//! observations, noisy depth with calibrated uncertainty, and gravity.

mod ate;
mod generate;
mod io;
mod render;
mod spec;

use crate::geometry::Pose;

/// Timestamped camera-to-world poses.
pub type Trajectory = Vec<(f64, Pose<f64>)>;

pub use ate::{align_rigid, ate_rmse};
pub use generate::{clean_depth, generate, ground_truth_trajectory, look_at, Dataset, GroundTruth, SimFrame};
pub use io::{read_trajectory, write_dataset, write_trajectory, DatasetMeta};
pub use render::{level_field, ray_plane_depth, render_depth, value_noise};
pub use spec::{CameraSpec, ClutterSpec, NoiseModel, PlaneRect, SceneSpec, TrajectorySpec, UncertaintyMode};
