//! Gravity-aware multi-plane detection.
//!
//! Horizontal planes need one sample point, vertical planes two, and walls
//! parallel or orthogonal to an already detected wall one again. Map points
//! count with weight 1.0, depth-derived points with 0.5, and points carrying
//! a surface normal must agree with the hypothesis normal to count as inliers.

mod export;
mod multi;
mod ransac;
mod sampling;
mod types;

pub use export::{inlier_mask_pgm, read_planes_json, write_inlier_mask_pgm, write_planes_json, PlaneRecord};
pub use multi::{detect_all_planes, PlaneSet, StageKind, StageLog};
pub use ransac::{
    detect_horizontal, detect_manhattan, detect_three_point, detect_vertical, ransac_iterations,
    weighted_inlier_score, RansacOutcome, RansacStats,
};
pub use sampling::sample_depth_points;
pub use types::{
    OrientationClass, Plane, RansacConfig, SamplePoint, SourceId, DEPTH_POINT_WEIGHT,
    MAP_POINT_WEIGHT,
};
