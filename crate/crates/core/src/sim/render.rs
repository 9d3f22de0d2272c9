use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::depth::Grid;
use crate::geometry::{Intrinsics, Pose};

use super::spec::PlaneRect;

const EDGE_TOL: f64 = 1e-9;

/// Ray parameter and rectangle hit test; `dir` has unit camera z-component,
/// so the returned parameter is the z-depth.
fn intersect(rect: &PlaneRect, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let n = rect.normal();
    let denom = n.dot(dir);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = -(n.dot(origin) + rect.offset()) / denom;
    if !(t > 0.0) {
        return None;
    }
    let (s, v) = rect.coords(&(origin + dir * t));
    let inside = |c: f64| (-EDGE_TOL..=1.0 + EDGE_TOL).contains(&c);
    (inside(s) && inside(v)).then_some(t)
}

/// Analytic z-depth of the nearest plane rectangle along a pixel ray.
pub fn ray_plane_depth(
    planes: &[PlaneRect],
    camera_to_world: &Pose<f64>,
    k: &Intrinsics<f64>,
    pixel: &Vector2<f64>,
) -> Option<f64> {
    let r = Vector3::new((pixel.x - k.cx) / k.fx, (pixel.y - k.cy) / k.fy, 1.0);
    let dir = camera_to_world.rotation * r;
    let origin = camera_to_world.translation;
    planes
        .iter()
        .filter_map(|p| intersect(p, &origin, &dir))
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))))
}

/// Noiseless depth buffer: plane rectangles plus constant-depth clutter
/// splats. Pixels without a surface are NaN.
pub fn render_depth(
    planes: &[PlaneRect],
    clutter: &[Vector3<f64>],
    splat_radius: f64,
    camera_to_world: &Pose<f64>,
    k: &Intrinsics<f64>,
) -> Grid<f64> {
    let mut depth = Grid::from_fn(k.width, k.height, |x, y| {
        ray_plane_depth(planes, camera_to_world, k, &Vector2::new(x as f64, y as f64)).unwrap_or(f64::NAN)
    });
    let world_to_camera = camera_to_world.inverse();
    let r = splat_radius;
    for x in clutter {
        let pc = world_to_camera.transform_point(x);
        if !(pc.z > 0.0) {
            continue;
        }
        let u = k.fx * pc.x / pc.z + k.cx;
        let v = k.fy * pc.y / pc.z + k.cy;
        let x0 = (u - r).ceil().max(0.0);
        let x1 = (u + r).floor().min(k.width as f64 - 1.0);
        let y0 = (v - r).ceil().max(0.0);
        let y1 = (v + r).floor().min(k.height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for py in y0 as usize..=y1 as usize {
            for px in x0 as usize..=x1 as usize {
                let (dx, dy) = (px as f64 - u, py as f64 - v);
                if dx * dx + dy * dy <= r * r {
                    let cur = depth.get(px, py);
                    if !(cur <= pc.z) {
                        depth.set(px, py, pc.z);
                    }
                }
            }
        }
    }
    depth
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smooth random field: Gaussian values on a coarse lattice, interpolated
/// with smoothstep weights, then standardized to zero mean and unit variance
/// over the image.
pub fn value_noise<R: Rng>(width: usize, height: usize, cell: f64, rng: &mut R) -> Grid<f64> {
    let gw = (width as f64 / cell).ceil() as usize + 2;
    let gh = (height as f64 / cell).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.sample(StandardNormal)).collect();
    let at = |i: usize, j: usize| lattice[j * gw + i];
    let raw = Grid::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64 / cell, y as f64 / cell);
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (smoothstep(fx - i as f64), smoothstep(fy - j as f64));
        let top = at(i, j) * (1.0 - tx) + at(i + 1, j) * tx;
        let bottom = at(i, j + 1) * (1.0 - tx) + at(i + 1, j + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    });
    let n = (width * height) as f64;
    let mean = raw.as_slice().iter().sum::<f64>() / n;
    let var = raw.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    raw.map(|v| (v - mean) / sd)
}

/// Smooth field in `(0, 1)`: a logistic squash of [`value_noise`] shifted by
/// `bias` (0 gives a near-uniform distribution).
pub fn level_field<R: Rng>(width: usize, height: usize, cell: f64, bias: f64, rng: &mut R) -> Grid<f64> {
    value_noise(width, height, cell, rng).map(|z| 1.0 / (1.0 + (-1.702 * (z - bias)).exp()))
}
