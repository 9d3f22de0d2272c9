use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GravityVector;
use crate::scalar::Real;

pub const MAP_POINT_WEIGHT: f64 = 1.0;
pub const DEPTH_POINT_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationClass {
    Horizontal,
    Vertical,
    General,
}

/// Origin of a sample point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceId {
    MapPoint(u64),
    DepthPixel { frame_id: u64, x: u32, y: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint<T: Real> {
    pub position: Vector3<T>,
    pub weight: T,
    pub normal: Option<Vector3<T>>,
    pub source: SourceId,
}

impl<T: Real> SamplePoint<T> {
    pub fn map_point(id: u64, position: Vector3<T>, normal: Option<Vector3<T>>) -> Self {
        Self {
            position,
            weight: T::lit(MAP_POINT_WEIGHT),
            normal,
            source: SourceId::MapPoint(id),
        }
    }

    pub fn depth_point(
        frame_id: u64,
        x: u32,
        y: u32,
        position: Vector3<T>,
        normal: Option<Vector3<T>>,
    ) -> Self {
        Self {
            position,
            weight: T::lit(DEPTH_POINT_WEIGHT),
            normal,
            source: SourceId::DepthPixel { frame_id, x, y },
        }
    }
}

/// Plane `normal . X + offset = 0` with unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T: Real> {
    pub normal: Vector3<T>,
    pub offset: T,
    pub class: OrientationClass,
    /// Sorted ids of the map points supporting the plane.
    pub inlier_ids: Vec<u64>,
    pub inlier_weight: T,
}

impl<T: Real> Plane<T> {
    /// Plane with no recorded support; `normal` is normalized.
    pub fn new(normal: Vector3<T>, offset: T, class: OrientationClass) -> Result<Self> {
        let n = normal.norm();
        if !(n > T::default_epsilon()) {
            return Err(Error::InvalidInput("plane normal has zero norm".into()));
        }
        Ok(Self {
            normal: normal / n,
            offset: offset / n,
            class,
            inlier_ids: Vec::new(),
            inlier_weight: T::zero(),
        })
    }

    pub fn coeffs(&self) -> Vector4<T> {
        Vector4::new(self.normal.x, self.normal.y, self.normal.z, self.offset)
    }

    /// `v^T [X; 1]`, the signed distance for a unit normal.
    #[inline]
    pub fn signed_distance(&self, p: &Vector3<T>) -> T {
        self.normal.x * p.x + self.normal.y * p.y + self.normal.z * p.z + self.offset
    }

    /// Checks the orientation-class invariant against `gravity`.
    pub fn satisfies_class(&self, gravity: &GravityVector<T>, angle_tol_deg: T) -> bool {
        let c = self.normal.dot(gravity.direction()).abs();
        let tol = deg_to_rad(angle_tol_deg);
        match self.class {
            OrientationClass::Horizontal => c > tol.cos(),
            OrientationClass::Vertical => c < tol.sin(),
            OrientationClass::General => true,
        }
    }

    pub fn cast<U: Real>(&self) -> Plane<U> {
        Plane {
            normal: self.normal.map(|v| U::lit(v.as_f64())),
            offset: U::lit(self.offset.as_f64()),
            class: self.class,
            inlier_ids: self.inlier_ids.clone(),
            inlier_weight: U::lit(self.inlier_weight.as_f64()),
        }
    }
}

pub(crate) fn deg_to_rad<T: Real>(deg: T) -> T {
    deg * T::pi() / T::lit(180.0)
}

/// RANSAC parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig<T: Real> {
    /// Desired success probability.
    pub p: T,
    /// Assumed inlier ratio.
    pub w: T,
    /// Inlier distance threshold, meters.
    pub theta: T,
    /// Tolerance for the horizontal/vertical classification, degrees.
    pub angle_tol_deg: T,
    /// Maximum angle between a point normal and the plane normal, degrees.
    pub normal_tol_deg: T,
    /// Acceptance threshold on the weighted inlier sum. `None` uses
    /// `max(20, 0.02 * working set size)`.
    pub min_weighted_inliers: Option<T>,
    pub max_planes: usize,
    /// Cap on sample draws per detection, degenerate ones included.
    pub max_draws: usize,
    pub seed: u64,
}

impl<T: Real> Default for RansacConfig<T> {
    fn default() -> Self {
        Self {
            p: T::lit(0.99),
            w: T::lit(0.1),
            theta: T::lit(0.05),
            angle_tol_deg: T::lit(5.0),
            normal_tol_deg: T::lit(30.0),
            min_weighted_inliers: None,
            max_planes: 6,
            max_draws: 10_000,
            seed: 0,
        }
    }
}

impl<T: Real> RansacConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let (z, o) = (T::zero(), T::one());
        if !(self.p > z && self.p < o) || !(self.w > z && self.w < o) || !(self.theta > z) {
            return Err(Error::Domain(format!(
                "invalid RANSAC config: p={}, w={}, theta={}",
                self.p.as_f64(),
                self.w.as_f64(),
                self.theta.as_f64()
            )));
        }
        Ok(())
    }

    /// Effective acceptance threshold for a working set of `n` points.
    pub fn min_inliers_for(&self, n: usize) -> T {
        self.min_weighted_inliers.unwrap_or_else(|| {
            let frac = T::lit(0.02 * n as f64);
            let floor = T::lit(20.0);
            if frac > floor {
                frac
            } else {
                floor
            }
        })
    }
}
