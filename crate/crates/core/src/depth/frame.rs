use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pose};
use crate::scalar::Real;

/// Row-major `height x width` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "grid data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Predicted depth (meters, NaN = invalid) and uncertainty for one image,
/// with its camera-to-world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame<T: Real> {
    pub frame_id: u64,
    pub depth: Grid<T>,
    pub uncertainty: Grid<T>,
    /// Camera to world.
    pub pose: Pose<T>,
    pub intrinsics: Intrinsics<T>,
}

impl<T: Real> DepthFrame<T> {
    pub fn new(
        frame_id: u64,
        depth: Grid<T>,
        uncertainty: Grid<T>,
        pose: Pose<T>,
        intrinsics: Intrinsics<T>,
    ) -> Result<Self> {
        let dims = (intrinsics.width, intrinsics.height);
        if (depth.width(), depth.height()) != dims || (uncertainty.width(), uncertainty.height()) != dims
        {
            return Err(Error::InvalidInput(format!(
                "depth {}x{} / uncertainty {}x{} do not match the {}x{} camera",
                depth.width(),
                depth.height(),
                uncertainty.width(),
                uncertainty.height(),
                dims.0,
                dims.1
            )));
        }
        Ok(Self {
            frame_id,
            depth,
            uncertainty,
            pose,
            intrinsics,
        })
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    /// Depth at an integer pixel, `None` when invalid.
    #[inline]
    pub fn depth_at(&self, x: usize, y: usize) -> Option<T> {
        let d = self.depth.get(x, y);
        (d.is_finite() && d > T::zero()).then_some(d)
    }

    /// Depth at a sub-pixel location.
    ///
    /// Inverse depth is bilinearly interpolated between the four surrounding
    /// samples. Inverse depth is affine in pixel coordinates over a plane, so
    /// the result is exact on any planar patch. All four samples must be valid.
    pub fn sample_depth(&self, pixel: &Vector2<T>) -> Option<T> {
        let (w, h) = (self.width(), self.height());
        if w < 2 || h < 2 || !self.intrinsics.contains(pixel) {
            return None;
        }
        let fx = pixel.x.floor().as_f64() as usize;
        let fy = pixel.y.floor().as_f64() as usize;
        let x0 = fx.min(w - 2);
        let y0 = fy.min(h - 2);
        let tx = pixel.x - T::lit(x0 as f64);
        let ty = pixel.y - T::lit(y0 as f64);
        let inv = |x, y| self.depth_at(x, y).map(|d| T::one() / d);
        let (a, b, c, d) = (
            inv(x0, y0)?,
            inv(x0 + 1, y0)?,
            inv(x0, y0 + 1)?,
            inv(x0 + 1, y0 + 1)?,
        );
        let one = T::one();
        let top = a * (one - tx) + b * tx;
        let bottom = c * (one - tx) + d * tx;
        let inv_depth = top * (one - ty) + bottom * ty;
        (inv_depth > T::zero()).then(|| one / inv_depth)
    }

    /// Uncertainty of the nearest pixel.
    pub fn uncertainty_near(&self, pixel: &Vector2<T>) -> Option<T> {
        if !self.intrinsics.contains(pixel) {
            return None;
        }
        let x = (pixel.x.as_f64().round() as usize).min(self.width() - 1);
        let y = (pixel.y.as_f64().round() as usize).min(self.height() - 1);
        Some(self.uncertainty.get(x, y))
    }

    /// Copy with every depth multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            depth: self.depth.map(|d| d * factor),
            ..self.clone()
        }
    }

    /// Back-projects an integer pixel into world coordinates.
    pub fn world_point(&self, x: usize, y: usize) -> Option<Vector3<T>> {
        let d = self.depth_at(x, y)?;
        let px = Vector2::new(T::lit(x as f64), T::lit(y as f64));
        let pc = crate::geometry::unproject(&px, d, &self.intrinsics).ok()?;
        Some(self.pose.transform_point(&pc))
    }
}

/// JSON header of the on-disk depth frame format.
///
/// The two maps live next to the header as `<stem>.depth.f32` and
/// `<stem>.uncertainty.f32`: flat little-endian `f32`, row-major, invalid
/// depth stored as NaN.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DepthFrameHeader {
    pub frame_id: u64,
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera-to-world `[R | t]`, 3x4 row-major.
    pub pose: [f64; 12],
}

fn sidecar(header: &Path, suffix: &str) -> PathBuf {
    let stem = header
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    header.with_file_name(format!("{stem}.{suffix}.f32"))
}

fn write_grid<T: Real>(path: &Path, grid: &Grid<T>) -> Result<()> {
    let mut bytes = Vec::with_capacity(grid.as_slice().len() * 4);
    for v in grid.as_slice() {
        bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_grid<T: Real>(path: &Path, width: usize, height: usize) -> Result<Grid<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != width * height * 4 {
        return Err(Error::format(
            path,
            format!("expected {} bytes, found {}", width * height * 4, bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    Grid::from_vec(width, height, data)
}

/// Writes `<dir>/<stem>.json` plus the two binary maps; returns the header path.
pub fn write_depth_frame<T: Real>(dir: &Path, stem: &str, frame: &DepthFrame<T>) -> Result<PathBuf> {
    let k = &frame.intrinsics;
    let r = &frame.pose.rotation;
    let t = &frame.pose.translation;
    let mut pose = [0.0; 12];
    for row in 0..3 {
        for col in 0..3 {
            pose[row * 4 + col] = r[(row, col)].as_f64();
        }
        pose[row * 4 + 3] = t[row].as_f64();
    }
    let header = DepthFrameHeader {
        frame_id: frame.frame_id,
        width: k.width,
        height: k.height,
        fx: k.fx.as_f64(),
        fy: k.fy.as_f64(),
        cx: k.cx.as_f64(),
        cy: k.cy.as_f64(),
        pose,
    };
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&header).map_err(|e| Error::format(&path, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    write_grid(&sidecar(&path, "depth"), &frame.depth)?;
    write_grid(&sidecar(&path, "uncertainty"), &frame.uncertainty)?;
    Ok(path)
}

/// Reads a frame written by [`write_depth_frame`], given its header path.
pub fn read_depth_frame<T: Real>(header_path: &Path) -> Result<DepthFrame<T>> {
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let h: DepthFrameHeader =
        serde_json::from_str(&text).map_err(|e| Error::format(header_path, e))?;
    let k = Intrinsics::new(
        T::lit(h.fx),
        T::lit(h.fy),
        T::lit(h.cx),
        T::lit(h.cy),
        h.width,
        h.height,
    )?;
    let p = &h.pose;
    let rotation = Matrix3::new(p[0], p[1], p[2], p[4], p[5], p[6], p[8], p[9], p[10]).map(T::lit);
    let translation = Vector3::new(p[3], p[7], p[11]).map(T::lit);
    let pose = Pose::new(rotation, translation)
        .map_err(|e| Error::format(header_path, e))?;
    let depth = read_grid(&sidecar(header_path, "depth"), h.width, h.height)?;
    let uncertainty = read_grid(&sidecar(header_path, "uncertainty"), h.width, h.height)?;
    DepthFrame::new(h.frame_id, depth, uncertainty, pose, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_frame() -> DepthFrame<f64> {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap();
        // plane z = 2 + 0.01 * X seen from the identity pose
        let depth = Grid::from_fn(64, 48, |x, _| {
            let ray_x = (x as f64 - 32.0) / 100.0;
            2.0 / (1.0 - 0.01 * ray_x)
        });
        let unc = Grid::filled(64, 48, 0.1);
        DepthFrame::new(3, depth, unc, Pose::identity(), k).unwrap()
    }

    #[test]
    fn subpixel_depth_is_exact_on_planes() {
        let f = plane_frame();
        let px = Vector2::new(17.3, 9.8);
        let ray_x = (px.x - 32.0) / 100.0;
        let expected = 2.0 / (1.0 - 0.01 * ray_x);
        assert!((f.sample_depth(&px).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn invalid_neighbour_gives_none() {
        let mut f = plane_frame();
        f.depth.set(10, 10, f64::NAN);
        assert!(f.sample_depth(&Vector2::new(9.5, 9.5)).is_none());
        assert!(f.sample_depth(&Vector2::new(12.5, 12.5)).is_some());
        assert!(f.sample_depth(&Vector2::new(-1.0, 3.0)).is_none());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap();
        let d = Grid::filled(10, 10, 1.0);
        let u = Grid::filled(64, 48, 0.0);
        assert!(DepthFrame::new(0, d, u, Pose::identity(), k).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = plane_frame();
        f.depth.set(0, 0, f64::NAN);
        f.pose = Pose::from_rotation_vector(
            Vector3::new(0.1, -0.2, 0.3),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let path = write_depth_frame(dir.path(), "frame_00003", &f).unwrap();
        let back: DepthFrame<f64> = read_depth_frame(&path).unwrap();
        assert_eq!(back.frame_id, 3);
        assert!(back.depth.get(0, 0).is_nan());
        assert_eq!(back.depth.get(5, 5), f.depth.get(5, 5) as f32 as f64);
        assert!((back.pose.rotation - f.pose.rotation).amax() < 1e-15);
        let raw = std::fs::read(dir.path().join("frame_00003.depth.f32")).unwrap();
        assert_eq!(raw.len(), 64 * 48 * 4);
        let first_valid = f32::from_le_bytes([raw[4], raw[5], raw[6], raw[7]]);
        assert_eq!(first_valid, f.depth.get(1, 0) as f32);
    }
}
