use nalgebra::Vector2;

use super::frame::DepthFrame;
use crate::error::{Error, Result};
use crate::geometry::Observation;
use crate::scalar::Real;

/// Synthesizes right-view keypoints for a virtual stereo rig.
///
/// The right camera sits `baseline` meters along the left camera's +x axis,
/// so the right pixel is the left pixel shifted by the disparity
/// `fx * baseline / depth` toward -x. Observations without a valid depth are
/// skipped. The uncertainty is inherited from the left keypoint.
pub fn virtual_right_features<T: Real>(
    frame: &DepthFrame<T>,
    left: &[Observation<T>],
    baseline: T,
) -> Result<Vec<Observation<T>>> {
    if !(baseline > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "virtual baseline must be positive, got {}",
            baseline.as_f64()
        )));
    }
    let bf = frame.intrinsics.fx * baseline;
    Ok(left
        .iter()
        .filter_map(|obs| {
            let depth = frame.sample_depth(&obs.pixel)?;
            Some(Observation {
                pixel: Vector2::new(obs.pixel.x - bf / depth, obs.pixel.y),
                ..*obs
            })
        })
        .collect())
}
