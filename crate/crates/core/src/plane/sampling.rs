use rand::seq::index::sample_weighted;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::types::SamplePoint;
use crate::depth::{clamp_uncertainty, DepthFrame, NormalMap, ScaleCorrection};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Draws up to `budget` depth pixels on a `stride` grid without replacement,
/// with probability proportional to `1 - u`.
///
/// Samples are back-projected with the scale-corrected depth into world
/// coordinates, carry the pixel's normal when one is available, and are
/// weighted 0.5. Asking for more than the valid pixels returns all of them.
pub fn sample_depth_points<T: Real>(
    frame: &DepthFrame<T>,
    normals: &NormalMap<T>,
    scale: &ScaleCorrection<T>,
    budget: usize,
    stride: usize,
    seed: u64,
) -> Result<Vec<SamplePoint<T>>> {
    if normals.width() != frame.width() || normals.height() != frame.height() {
        return Err(Error::InvalidInput(
            "normal map and depth frame have different sizes".into(),
        ));
    }
    let stride = stride.max(1);
    let mut candidates = Vec::new();
    let mut weights = Vec::new();
    for y in (0..frame.height()).step_by(stride) {
        for x in (0..frame.width()).step_by(stride) {
            if frame.depth_at(x, y).is_none() {
                continue;
            }
            let (u, _) = clamp_uncertainty(frame.uncertainty.get(x, y));
            candidates.push((x, y));
            weights.push((T::one() - u).as_f64());
        }
    }
    if budget == 0 || candidates.is_empty() {
        return Ok(Vec::new());
    }
    let chosen: Vec<usize> = if budget >= candidates.len() {
        (0..candidates.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_weighted(&mut rng, candidates.len(), |i| weights[i], budget)
            .map_err(|e| Error::InvalidInput(format!("weighted sampling failed: {e}")))?
            .into_vec()
    };
    let scaled = frame.scaled(scale.factor);
    Ok(chosen
        .into_iter()
        .filter_map(|i| {
            let (x, y) = candidates[i];
            let position = scaled.world_point(x, y)?;
            Some(SamplePoint::depth_point(
                frame.frame_id,
                x as u32,
                y as u32,
                position,
                normals.get(x, y),
            ))
        })
        .collect())
}
