use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector2, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ba::FrameInput;
use crate::depth::{DepthFrame, Grid};
use crate::error::{Error, Result};
use crate::geometry::{project, GravityVector, Intrinsics, Observation, Pose};
use crate::plane::{OrientationClass, Plane};

use super::render::{level_field, render_depth, value_noise};
use super::spec::{SceneSpec, UncertaintyMode};
use super::Trajectory;

/// Relative tolerance of the depth-buffer visibility test.
const VISIBILITY_TOL: f64 = 1e-9;

/// Noisy depth and uncertainty with the odometry pose estimate.
pub type SimFrame = FrameInput<f64>;

/// What the estimator gets to see.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub intrinsics: Intrinsics<f64>,
    pub baseline: f64,
    /// Measured gravity direction.
    pub gravity: GravityVector<f64>,
    pub frames: Vec<SimFrame>,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Camera-to-world poses.
    pub trajectory: Trajectory,
    pub points: BTreeMap<u64, Vector3<f64>>,
    /// Index into `planes` for plane points, `None` for clutter.
    pub point_plane: BTreeMap<u64, Option<usize>>,
    pub planes: Vec<Plane<f64>>,
}

fn catmull_rom(points: &[Vector3<f64>], s: f64) -> Vector3<f64> {
    let m = points.len();
    let i = (s.floor() as usize).min(m - 2);
    let t = s - i as f64;
    let at = |j: isize| points[j.clamp(0, m as isize - 1) as usize];
    let (p0, p1, p2, p3) = (at(i as isize - 1), at(i as isize), at(i as isize + 1), at(i as isize + 2));
    let (t2, t3) = (t * t, t * t * t);
    (p1 * 2.0 + (p2 - p0) * t + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3)
        * 0.5
}

/// Camera-to-world pose at `center` looking at `target`, image y along gravity.
pub fn look_at(center: Vector3<f64>, target: Vector3<f64>, gravity: &Vector3<f64>) -> Result<Pose<f64>> {
    let z = (target - center).normalize();
    let x = gravity.cross(&z);
    if !(x.norm() > 1e-6) {
        return Err(Error::InvalidInput("viewing direction parallel to gravity".into()));
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Pose::new(Matrix3::from_columns(&[x, y, z]), center)
}

/// Ground-truth camera-to-world trajectory of a spec.
pub fn ground_truth_trajectory(spec: &SceneSpec) -> Result<Trajectory> {
    let t = &spec.trajectory;
    let way: Vec<Vector3<f64>> = t.waypoints.iter().map(|w| Vector3::from(*w)).collect();
    let tgt: Vec<Vector3<f64>> = t.look_at.iter().map(|w| Vector3::from(*w)).collect();
    let g = Vector3::from(spec.gravity).normalize();
    let span = (way.len() - 1) as f64;
    (0..t.frames)
        .map(|i| {
            let s = if t.frames > 1 { span * i as f64 / (t.frames - 1) as f64 } else { 0.0 };
            let pose = look_at(catmull_rom(&way, s), catmull_rom(&tgt, s), &g)?;
            Ok((i as f64 / t.frame_rate, pose))
        })
        .collect()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian3(rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| sigma * rng.sample::<f64, _>(StandardNormal))
}

/// Renders a dataset and its ground truth. Identical specs give identical
/// output.
pub fn generate(spec: &SceneSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let k = spec.camera.intrinsics()?;
    let noise = &spec.noise;

    let mut rng = stream(spec.seed, 0);
    let mut points = BTreeMap::new();
    let mut point_plane = BTreeMap::new();
    let mut next_id = 0u64;
    for (pi, rect) in spec.planes.iter().enumerate() {
        for _ in 0..spec.points_per_plane {
            let s = rng.random_range(0.03..0.97);
            let t = rng.random_range(0.03..0.97);
            points.insert(next_id, rect.origin() + rect.u() * s + rect.v() * t);
            point_plane.insert(next_id, Some(pi));
            next_id += 1;
        }
    }
    let c = &spec.clutter;
    let mut clutter = Vec::new();
    for _ in 0..spec.clutter_count() {
        let p = Vector3::from_fn(|i, _| rng.random_range(c.min[i]..=c.max[i]));
        clutter.push(p);
        points.insert(next_id, p);
        point_plane.insert(next_id, None);
        next_id += 1;
    }
    let planes: Vec<Plane<f64>> = spec
        .planes
        .iter()
        .map(|r| {
            let n = r.normal();
            let class = if n.dot(&Vector3::from(spec.gravity).normalize()).abs() > 0.999 {
                OrientationClass::Horizontal
            } else if n.dot(&Vector3::from(spec.gravity)).abs() < 1e-3 {
                OrientationClass::Vertical
            } else {
                OrientationClass::General
            };
            Plane::new(n, r.offset(), class)
        })
        .collect::<Result<_>>()?;

    let truth = ground_truth_trajectory(spec)?;

    // Odometry-style initial estimates: noisy relative motions chained from
    // the exact first pose.
    let mut rng = stream(spec.seed, 1);
    let rot_sigma = noise.odometry_rotation_sigma_deg.to_radians();
    let mut init = Vec::with_capacity(truth.len());
    for (i, (_, gt)) in truth.iter().enumerate() {
        let exact = noise.odometry_translation_sigma == 0.0 && rot_sigma == 0.0;
        if i == 0 || exact {
            init.push(*gt);
            continue;
        }
        let rel = truth[i - 1].1.inverse().compose(gt);
        let w = gaussian3(&mut rng, rot_sigma);
        let v = gaussian3(&mut rng, noise.odometry_translation_sigma);
        let jitter = Pose::identity().retract(&Vector6::new(w.x, w.y, w.z, v.x, v.y, v.z));
        let prev: Pose<f64> = init[i - 1];
        init.push(prev.compose(&rel).compose(&jitter));
    }

    let g_true = Vector3::from(spec.gravity).normalize();
    let gravity = if noise.gravity_error_deg > 0.0 {
        let mut axis = g_true.cross(&gaussian3(&mut rng, 1.0));
        if axis.norm() < 1e-9 {
            axis = g_true.cross(&Vector3::x());
        }
        let omega = axis.normalize() * noise.gravity_error_deg.to_radians();
        GravityVector::new(crate::geometry::so3_exp(&omega) * g_true)?
    } else {
        GravityVector::new(g_true)?
    };

    let ratio = noise.noise_ratio;
    let frames: Vec<Result<SimFrame>> = truth
        .par_iter()
        .enumerate()
        .map(|(i, (stamp, gt))| {
            let mut rng = stream(spec.seed, 16 + i as u64);
            let (w, h) = (k.width, k.height);
            let clean = render_depth(&spec.planes, &clutter, c.splat_radius, gt, &k);
            let level = level_field(w, h, noise.level_cell, noise.level_bias, &mut rng);
            let err = value_noise(w, h, noise.depth_cell, &mut rng);
            let u_level = match noise.uncertainty_mode {
                UncertaintyMode::Uncorrelated => {
                    Some(level_field(w, h, noise.level_cell, noise.level_bias, &mut rng))
                }
                _ => None,
            };
            let depth = Grid::from_fn(w, h, |x, y| {
                let z = clean.get(x, y);
                let sigma = noise.depth_sigma * ratio.powf(level.get(x, y));
                z * noise.depth_scale * (1.0 + sigma * err.get(x, y))
            });
            let uncertainty = Grid::from_fn(w, h, |x, y| match noise.uncertainty_mode {
                UncertaintyMode::Correlated => 1.0 - ratio.powf(-2.0 * level.get(x, y)),
                UncertaintyMode::Uncorrelated => {
                    1.0 - ratio.powf(-2.0 * u_level.as_ref().expect("field drawn").get(x, y))
                }
                UncertaintyMode::Zero => 0.0,
            });

            let clean_frame = DepthFrame::new(i as u64, clean, Grid::filled(w, h, 0.0), *gt, k)?;
            let to_cam = gt.inverse();
            let mut observations = Vec::new();
            for (&id, x) in &points {
                let pc = to_cam.transform_point(x);
                let Ok(px) = project(&pc, &k) else { continue };
                if !(px.x >= 0.0 && px.y >= 0.0 && px.x < (w - 1) as f64 && px.y < (h - 1) as f64) {
                    continue;
                }
                let Some(z) = clean_frame.sample_depth(&px) else { continue };
                if (z - pc.z).abs() > VISIBILITY_TOL * pc.z {
                    continue;
                }
                let (nx, ny) = (px.x.round() as usize, px.y.round() as usize);
                let sigma = noise.pixel_sigma * ratio.powf(level.get(nx, ny));
                let jitter = Vector2::new(
                    sigma * rng.sample::<f64, _>(StandardNormal),
                    sigma * rng.sample::<f64, _>(StandardNormal),
                );
                observations.push(Observation {
                    frame_id: i as u64,
                    point_id: id,
                    pixel: px + jitter,
                    uncertainty_u: uncertainty.get(nx, ny),
                });
            }
            Ok(SimFrame {
                frame_id: i as u64,
                timestamp: *stamp,
                depth: DepthFrame::new(i as u64, depth, uncertainty, init[i], k)?,
                observations,
            })
        })
        .collect();
    let frames = frames.into_iter().collect::<Result<Vec<_>>>()?;

    let plane_obs = frames
        .iter()
        .flat_map(|f| &f.observations)
        .filter(|o| point_plane[&o.point_id].is_some())
        .count();
    if plane_obs == 0 {
        return Err(Error::InvalidInput("no plane is visible from the trajectory".into()));
    }

    Ok((
        Dataset {
            intrinsics: k,
            baseline: spec.camera.baseline,
            gravity,
            frames,
        },
        GroundTruth {
            trajectory: truth,
            points,
            point_plane,
            planes,
        },
    ))
}

/// Noiseless depth buffer of frame `index`, rendered from the spec.
pub fn clean_depth(spec: &SceneSpec, truth: &GroundTruth, index: usize) -> Result<Grid<f64>> {
    let k = spec.camera.intrinsics()?;
    let clutter: Vec<Vector3<f64>> = truth
        .point_plane
        .iter()
        .filter(|(_, p)| p.is_none())
        .map(|(id, _)| truth.points[id])
        .collect();
    let pose = truth
        .trajectory
        .get(index)
        .ok_or_else(|| Error::InvalidInput(format!("no frame {index}")))?
        .1;
    Ok(render_depth(&spec.planes, &clutter, spec.clutter.splat_radius, &pose, &k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::NoiseModel;

    fn small() -> SceneSpec {
        let mut s = SceneSpec::default_room();
        s.trajectory.frames = 6;
        s
    }

    #[test]
    fn same_seed_same_dataset() {
        let (a, _) = generate(&small()).unwrap();
        let (b, _) = generate(&small()).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.observations, fb.observations);
            assert_eq!(fa.depth.depth.as_slice().len(), fb.depth.depth.as_slice().len());
            assert!(fa
                .depth
                .depth
                .as_slice()
                .iter()
                .zip(fb.depth.depth.as_slice())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let (c, _) = generate(&small().with_seed(9)).unwrap();
        assert_ne!(a.frames[1].observations, c.frames[1].observations);
    }

    #[test]
    fn noiseless_observations_reproject_exactly() {
        let mut spec = small();
        spec.noise = NoiseModel::noiseless();
        let (data, truth) = generate(&spec).unwrap();
        for (f, (_, pose)) in data.frames.iter().zip(&truth.trajectory) {
            assert!(f.observations.len() > 50, "only {} observations", f.observations.len());
            let to_cam = pose.inverse();
            for o in &f.observations {
                let px = project(&to_cam.transform_point(&truth.points[&o.point_id]), &data.intrinsics).unwrap();
                assert!((px - o.pixel).norm() < 1e-9);
                assert_eq!(o.uncertainty_u, 0.0);
            }
            assert_eq!(f.depth.pose, *pose);
        }
    }

    #[test]
    fn camera_sees_all_three_planes() {
        let (data, truth) = generate(&small()).unwrap();
        for f in &data.frames {
            let mut seen = [0usize; 3];
            for o in &f.observations {
                if let Some(p) = truth.point_plane[&o.point_id] {
                    seen[p] += 1;
                }
            }
            assert!(seen.iter().all(|&n| n >= 10), "per-plane counts {seen:?}");
        }
    }

    #[test]
    fn look_at_has_image_y_along_gravity() {
        let g = Vector3::new(0.0, 0.0, -1.0);
        let p = look_at(Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0), &g).unwrap();
        assert!((p.rotation.column(1) - g).norm() < 1e-12);
        assert!((p.rotation.column(0) - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn invisible_scene_is_rejected() {
        let mut spec = small();
        for w in spec.trajectory.look_at.iter_mut() {
            *w = [-10.0, -10.0, 1.5];
        }
        spec.planes.truncate(1);
        spec.planes[0].origin = [100.0, 100.0, 0.0];
        assert!(generate(&spec).is_err());
    }
}
