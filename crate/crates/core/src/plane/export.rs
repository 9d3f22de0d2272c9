use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{OrientationClass, Plane};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Serialized form of a [`Plane`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneRecord {
    pub coeffs: [f64; 4],
    pub orientation_class: OrientationClass,
    pub inlier_ids: Vec<u64>,
    pub inlier_weight: f64,
}

impl<T: Real> From<&Plane<T>> for PlaneRecord {
    fn from(p: &Plane<T>) -> Self {
        let c = p.coeffs();
        PlaneRecord {
            coeffs: [c.x.as_f64(), c.y.as_f64(), c.z.as_f64(), c.w.as_f64()],
            orientation_class: p.class,
            inlier_ids: p.inlier_ids.clone(),
            inlier_weight: p.inlier_weight.as_f64(),
        }
    }
}

impl PlaneRecord {
    pub fn to_plane<T: Real>(&self) -> Result<Plane<T>> {
        let [a, b, c, d] = self.coeffs.map(T::lit);
        let mut plane = Plane::new(nalgebra::Vector3::new(a, b, c), d, self.orientation_class)?;
        plane.inlier_ids = self.inlier_ids.clone();
        plane.inlier_weight = T::lit(self.inlier_weight);
        Ok(plane)
    }
}

pub fn write_planes_json<T: Real>(path: &Path, planes: &[Plane<T>]) -> Result<()> {
    let records: Vec<PlaneRecord> = planes.iter().map(PlaneRecord::from).collect();
    let text = serde_json::to_string_pretty(&records).map_err(|e| Error::format(path, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_planes_json(path: &Path) -> Result<Vec<PlaneRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

/// Binary PGM (P5) image: pixel value `label` where `labels` holds a plane
/// index (`1 + index`, scaled to spread the gray levels), 0 elsewhere.
pub fn inlier_mask_pgm(width: usize, height: usize, labels: &[Option<usize>]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    let levels = labels.iter().flatten().max().map_or(1, |m| m + 1);
    let step = (255 / levels.max(1)).max(1);
    out.extend(labels.iter().map(|l| match l {
        Some(i) => (((i + 1) * step).min(255)) as u8,
        None => 0,
    }));
    out
}

pub fn write_inlier_mask_pgm(
    path: &Path,
    width: usize,
    height: usize,
    labels: &[Option<usize>],
) -> Result<()> {
    if labels.len() != width * height {
        return Err(Error::InvalidInput(format!(
            "mask has {} labels for a {width}x{height} image",
            labels.len()
        )));
    }
    fs::write(path, inlier_mask_pgm(width, height, labels)).map_err(|e| Error::io(path, e))
}
