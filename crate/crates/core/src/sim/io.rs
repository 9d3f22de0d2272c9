use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::depth::write_depth_frame;
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::plane::write_planes_json;

use super::generate::{Dataset, GroundTruth};
use super::spec::SceneSpec;
use super::Trajectory;

/// Writes `t tx ty tz qx qy qz qw` rows.
pub fn write_trajectory(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let mut out = String::new();
    for (t, pose) in trajectory {
        let q = pose.quaternion();
        let p = pose.translation;
        out.push_str(&format!(
            "{t} {} {} {} {} {} {} {}\n",
            p.x, p.y, p.z, q.i, q.j, q.k, q.w
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path, format!("line {}: {e}", line_no + 1)))?;
        if v.len() != 8 {
            return Err(Error::format(path, format!("line {}: expected 8 fields", line_no + 1)));
        }
        let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(v[7], v[4], v[5], v[6]));
        out.push((v[0], Pose::from_quaternion(q, nalgebra::Vector3::new(v[1], v[2], v[3]))));
    }
    Ok(out)
}

/// Summary written as `meta.json` next to a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub frames: usize,
    pub baseline: f64,
    pub timestamps: Vec<f64>,
    pub spec: SceneSpec,
}

#[derive(Serialize)]
struct GravityFile {
    gravity: [f64; 3],
}

#[derive(Serialize)]
struct ObservationRow {
    frame_id: u64,
    point_id: u64,
    x: f64,
    y: f64,
    u: f64,
}

/// Writes the dataset (`frames/`, `observations.csv`, `gravity.json`,
/// `meta.json`) and ground truth (`groundtruth.txt`, `planes.json`).
pub fn write_dataset(dir: &Path, spec: &SceneSpec, data: &Dataset, truth: &GroundTruth) -> Result<()> {
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for f in &data.frames {
        write_depth_frame(&frames_dir, &format!("frame_{:06}", f.frame_id), &f.depth)?;
    }

    let obs_path = dir.join("observations.csv");
    let mut w = csv::Writer::from_path(&obs_path).map_err(|e| Error::format(&obs_path, e.to_string()))?;
    for o in data.frames.iter().flat_map(|f| &f.observations) {
        w.serialize(ObservationRow {
            frame_id: o.frame_id,
            point_id: o.point_id,
            x: o.pixel.x,
            y: o.pixel.y,
            u: o.uncertainty_u,
        })
        .map_err(|e| Error::format(&obs_path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&obs_path, e))?;

    let g = data.gravity.direction();
    write_json(&dir.join("gravity.json"), &GravityFile { gravity: [g.x, g.y, g.z] })?;
    write_json(
        &dir.join("meta.json"),
        &DatasetMeta {
            frames: data.frames.len(),
            baseline: data.baseline,
            timestamps: data.frames.iter().map(|f| f.timestamp).collect(),
            spec: spec.clone(),
        },
    )?;
    write_trajectory(&dir.join("groundtruth.txt"), &truth.trajectory)?;
    write_planes_json(&dir.join("planes.json"), &truth.planes)
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
