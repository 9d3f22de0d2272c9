//! Quantities derived from a depth/uncertainty frame: surface normals,
//! global scale correction, map-point normal fusion, uncertainty weighting
//! and virtual right-view observations.

mod frame;
mod fusion;
mod normals;
mod scale;
mod virtual_right;
mod weighting;

pub use frame::{read_depth_frame, write_depth_frame, DepthFrame, DepthFrameHeader, Grid};
pub use fusion::{fuse_normal, FusionOutcome, NormalEntry, NormalSnapshot, NormalStore};
pub use normals::{compute_normal_map, normal_from_depth, NormalMap, DEFAULT_NORMAL_SHIFT};
pub use scale::{scale_correction, ScaleCorrection, ScaleMode, MIN_SCALE_SAMPLES};
pub use virtual_right::virtual_right_features;
pub use weighting::{clamp_uncertainty, information_from_uncertainty, UncertaintyInformation};
