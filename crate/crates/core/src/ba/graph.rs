use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Observation, Pose};
use crate::plane::Plane;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum View {
    Left,
    /// Virtual right camera, `baseline` meters along the left camera's +x.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprojFactor<T: Real> {
    pub obs: Observation<T>,
    pub view: View,
}

/// Unary edge pulling a point onto a fixed plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaneFactor {
    pub point_id: u64,
    pub plane_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttachMode {
    /// One factor per plane within the threshold (corners get several).
    #[default]
    All,
    /// Only the nearest plane within the threshold.
    NearestOnly,
}

/// Poses (world to camera), points, and the factors between them.
#[derive(Debug, Clone)]
pub struct FactorGraph<T: Real> {
    pub intrinsics: Intrinsics<T>,
    /// Virtual stereo baseline used by right-view factors, meters.
    pub baseline: T,
    pub poses: BTreeMap<u64, Pose<T>>,
    pub fixed_poses: BTreeSet<u64>,
    pub points: BTreeMap<u64, Vector3<T>>,
    pub reproj_factors: Vec<ReprojFactor<T>>,
    pub plane_factors: Vec<PlaneFactor>,
    /// Planes are constants of the optimization.
    pub planes: Vec<Plane<T>>,
}

impl<T: Real> FactorGraph<T> {
    pub fn new(intrinsics: Intrinsics<T>, baseline: T) -> Self {
        Self {
            intrinsics,
            baseline,
            poses: BTreeMap::new(),
            fixed_poses: BTreeSet::new(),
            points: BTreeMap::new(),
            reproj_factors: Vec::new(),
            plane_factors: Vec::new(),
            planes: Vec::new(),
        }
    }

    pub fn add_pose(&mut self, frame_id: u64, world_to_camera: Pose<T>, fixed: bool) {
        self.poses.insert(frame_id, world_to_camera);
        if fixed {
            self.fixed_poses.insert(frame_id);
        } else {
            self.fixed_poses.remove(&frame_id);
        }
    }

    pub fn add_point(&mut self, point_id: u64, position: Vector3<T>) {
        self.points.insert(point_id, position);
    }

    /// Adds a reprojection factor; both endpoints must already exist.
    pub fn add_observation(&mut self, obs: Observation<T>, view: View) -> Result<()> {
        if !self.poses.contains_key(&obs.frame_id) || !self.points.contains_key(&obs.point_id) {
            return Err(Error::InvalidInput(format!(
                "observation links unknown frame {} or point {}",
                obs.frame_id, obs.point_id
            )));
        }
        self.reproj_factors.push(ReprojFactor { obs, view });
        Ok(())
    }

    /// World-to-camera pose of the view a factor is measured in.
    pub fn view_pose(&self, pose: &Pose<T>, view: View) -> Pose<T> {
        match view {
            View::Left => *pose,
            View::Right => Pose {
                rotation: pose.rotation,
                translation: pose.translation - Vector3::new(self.baseline, T::zero(), T::zero()),
            },
        }
    }

    /// Checks that every factor references existing nodes.
    pub fn validate(&self) -> Result<()> {
        for f in &self.reproj_factors {
            if !self.poses.contains_key(&f.obs.frame_id) || !self.points.contains_key(&f.obs.point_id)
            {
                return Err(Error::InvalidInput(format!(
                    "dangling reprojection factor ({}, {})",
                    f.obs.frame_id, f.obs.point_id
                )));
            }
        }
        for f in &self.plane_factors {
            if !self.points.contains_key(&f.point_id) || f.plane_index >= self.planes.len() {
                return Err(Error::InvalidInput(format!(
                    "dangling plane factor (point {}, plane {})",
                    f.point_id, f.plane_index
                )));
            }
        }
        Ok(())
    }
}

/// Replaces the plane set and attaches a unary factor from every point lying
/// within `theta` of a plane.
pub fn attach_plane_factors<T: Real>(
    graph: &mut FactorGraph<T>,
    planes: Vec<Plane<T>>,
    theta: T,
    mode: AttachMode,
) {
    graph.planes = planes;
    graph.plane_factors.clear();
    for (&point_id, x) in &graph.points {
        let near = graph
            .planes
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.signed_distance(x).abs()))
            .filter(|&(_, d)| d < theta);
        match mode {
            AttachMode::All => graph
                .plane_factors
                .extend(near.map(|(plane_index, _)| PlaneFactor {
                    point_id,
                    plane_index,
                })),
            AttachMode::NearestOnly => {
                let best = near.fold(None, |acc: Option<(usize, T)>, (i, d)| match acc {
                    Some((_, bd)) if bd <= d => acc,
                    _ => Some((i, d)),
                });
                if let Some((plane_index, _)) = best {
                    graph.plane_factors.push(PlaneFactor {
                        point_id,
                        plane_index,
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::OrientationClass;

    fn graph() -> FactorGraph<f64> {
        let k = Intrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        FactorGraph::new(k, 0.1)
    }

    fn floor() -> Plane<f64> {
        Plane::new(Vector3::z(), 0.0, OrientationClass::Horizontal).unwrap()
    }

    fn wall() -> Plane<f64> {
        Plane::new(Vector3::x(), -2.0, OrientationClass::Vertical).unwrap()
    }

    #[test]
    fn threshold_is_strict() {
        let mut g = graph();
        g.add_point(1, Vector3::new(0.5, 0.5, 0.05 + 1e-9));
        g.add_point(2, Vector3::new(0.5, 0.5, 0.05 - 1e-9));
        attach_plane_factors(&mut g, vec![floor()], 0.05, AttachMode::All);
        assert_eq!(g.plane_factors, vec![PlaneFactor { point_id: 2, plane_index: 0 }]);
    }

    #[test]
    fn corner_point_gets_two_factors() {
        let mut g = graph();
        g.add_point(7, Vector3::new(1.98, 1.0, 0.01));
        attach_plane_factors(&mut g, vec![floor(), wall()], 0.05, AttachMode::All);
        assert_eq!(g.plane_factors.len(), 2);
        attach_plane_factors(&mut g, vec![floor(), wall()], 0.05, AttachMode::NearestOnly);
        assert_eq!(g.plane_factors, vec![PlaneFactor { point_id: 7, plane_index: 0 }]);
    }

    #[test]
    fn empty_plane_list_clears_factors() {
        let mut g = graph();
        g.add_point(1, Vector3::new(0.0, 0.0, 0.0));
        attach_plane_factors(&mut g, vec![floor()], 0.05, AttachMode::All);
        assert_eq!(g.plane_factors.len(), 1);
        attach_plane_factors(&mut g, vec![], 0.05, AttachMode::All);
        assert!(g.plane_factors.is_empty());
        assert!(g.planes.is_empty());
    }

    #[test]
    fn observation_requires_nodes() {
        let mut g = graph();
        let obs = Observation {
            frame_id: 0,
            point_id: 0,
            pixel: nalgebra::Vector2::new(1.0, 1.0),
            uncertainty_u: 0.0,
        };
        assert!(g.add_observation(obs, View::Left).is_err());
        g.add_pose(0, Pose::identity(), true);
        g.add_point(0, Vector3::new(0.0, 0.0, 2.0));
        g.add_observation(obs, View::Left).unwrap();
        assert!(g.validate().is_ok());
    }
}
