use nalgebra::{Vector2, Vector3};

use super::frame::DepthFrame;
use crate::geometry::unproject;
use crate::scalar::Real;

/// Default pixel shift for normal estimation.
pub const DEFAULT_NORMAL_SHIFT: usize = 4;

/// Surface normal at integer pixel `(x, y)` in world coordinates.
///
/// Back-projects `(x, y)`, `(x, y - delta)` and `(x - delta, y)` with their
/// depths, crosses the two in-plane difference vectors and rotates the result
/// into the world frame. The normal is oriented toward the observing camera.
/// Returns `None` if any of the three depths is invalid.
pub fn normal_from_depth<T: Real>(
    frame: &DepthFrame<T>,
    x: usize,
    y: usize,
    delta: usize,
) -> Option<Vector3<T>> {
    if delta == 0 || x < delta || y < delta || x >= frame.width() || y >= frame.height() {
        return None;
    }
    let k = &frame.intrinsics;
    let back = |px: usize, py: usize| {
        let d = frame.depth_at(px, py)?;
        unproject(&Vector2::new(T::lit(px as f64), T::lit(py as f64)), d, k).ok()
    };
    let center = back(x, y)?;
    let up = back(x, y - delta)? - center;
    let left = back(x - delta, y)? - center;
    let mut n = up.cross(&left);
    let norm = n.norm();
    if !(norm > T::zero()) || !norm.is_finite() {
        return None;
    }
    n /= norm;
    // face the camera: negative dot with the viewing ray
    if n.dot(&center) > T::zero() {
        n = -n;
    }
    Some(frame.pose.rotate(&n))
}

/// Per-pixel world normals with a validity mask (`None` = masked).
#[derive(Debug, Clone)]
pub struct NormalMap<T: Real> {
    width: usize,
    height: usize,
    normals: Vec<Option<Vector3<T>>>,
}

impl<T: Real> NormalMap<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Vector3<T>> {
        if x >= self.width || y >= self.height {
            return None;
        }
        self.normals[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.normals.iter().filter(|n| n.is_some()).count()
    }
}

/// Evaluates [`normal_from_depth`] at every pixel.
pub fn compute_normal_map<T: Real>(frame: &DepthFrame<T>, delta: usize) -> NormalMap<T> {
    let (w, h) = (frame.width(), frame.height());
    let mut normals = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            normals.push(normal_from_depth(frame, x, y, delta));
        }
    }
    NormalMap {
        width: w,
        height: h,
        normals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::Grid;
    use crate::geometry::{Intrinsics, Pose};

    fn frame_with(depth: Grid<f64>, pose: Pose<f64>) -> DepthFrame<f64> {
        let k = Intrinsics::new(120.0, 120.0, 40.0, 30.0, 80, 60).unwrap();
        let unc = Grid::filled(80, 60, 0.0);
        DepthFrame::new(0, depth, unc, pose, k).unwrap()
    }

    #[test]
    fn fronto_parallel_plane_faces_camera() {
        let f = frame_with(Grid::filled(80, 60, 2.5), Pose::identity());
        let n = normal_from_depth(&f, 40, 30, 4).unwrap();
        assert!((n - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        let map = compute_normal_map(&f, 4);
        assert_eq!(map.valid_count(), (80 - 4) * (60 - 4));
        assert!(map.get(2, 2).is_none());
    }

    #[test]
    fn invalid_neighbour_masks_normal() {
        let mut depth = Grid::filled(80, 60, 2.0);
        depth.set(36, 30, f64::NAN);
        let f = frame_with(depth, Pose::identity());
        assert!(normal_from_depth(&f, 40, 30, 4).is_none());
        assert!(normal_from_depth(&f, 41, 30, 4).is_some());
    }

    #[test]
    fn rotated_into_world() {
        // camera looking along world +x: camera z -> world x
        let r = nalgebra::Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
        let pose = Pose::new(r, Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let f = frame_with(Grid::filled(80, 60, 3.0), pose);
        let n = normal_from_depth(&f, 20, 20, 4).unwrap();
        assert!((n - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }
}
