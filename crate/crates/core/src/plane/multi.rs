use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ransac::{horizontal_with, manhattan_with, vertical_with, RansacOutcome, RansacStats};
use super::types::{Plane, RansacConfig, SamplePoint};
use crate::error::Result;
use crate::geometry::GravityVector;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    Horizontal,
    MainVertical,
    Manhattan,
    Vertical,
}

/// One detection attempt inside [`detect_all_planes`].
#[derive(Debug, Clone, PartialEq)]
pub struct StageLog {
    pub kind: StageKind,
    pub stats: RansacStats,
    pub accepted: bool,
    pub working_set: usize,
}

#[derive(Debug, Clone)]
pub struct PlaneSet<T: Real> {
    /// Planes in detection order.
    pub planes: Vec<Plane<T>>,
    pub stages: Vec<StageLog>,
}

impl<T: Real> PlaneSet<T> {
    pub fn total_trials(&self) -> usize {
        self.stages.iter().map(|s| s.stats.trials).sum()
    }

    pub fn elapsed(&self) -> Duration {
        self.stages.iter().map(|s| s.stats.elapsed).sum()
    }
}

struct Detector<'a, T: Real> {
    working: Vec<SamplePoint<T>>,
    gravity: &'a GravityVector<T>,
    cfg: &'a RansacConfig<T>,
    rng: ChaCha8Rng,
    out: PlaneSet<T>,
}

impl<T: Real> Detector<'_, T> {
    fn full(&self) -> bool {
        self.out.planes.len() >= self.cfg.max_planes
    }

    fn run(
        &mut self,
        kind: StageKind,
        main_wall: Option<&Plane<T>>,
    ) -> Result<Option<Plane<T>>> {
        let outcome: RansacOutcome<T> = match (kind, main_wall) {
            (StageKind::Horizontal, _) => {
                horizontal_with(&self.working, self.gravity, self.cfg, &mut self.rng)?
            }
            (StageKind::Manhattan, Some(main)) => {
                manhattan_with(&self.working, self.gravity, main, self.cfg, &mut self.rng)?
            }
            _ => vertical_with(&self.working, self.gravity, self.cfg, &mut self.rng)?,
        };
        self.out.stages.push(StageLog {
            kind,
            stats: outcome.stats,
            accepted: outcome.plane.is_some(),
            working_set: self.working.len(),
        });
        let Some(plane) = outcome.plane else {
            return Ok(None);
        };
        let mut keep = vec![true; self.working.len()];
        for &i in &outcome.inlier_indices {
            keep[i] = false;
        }
        let mut flags = keep.into_iter();
        self.working.retain(|_| flags.next().unwrap_or(true));
        self.out.planes.push(plane.clone());
        Ok(Some(plane))
    }

    fn repeat(&mut self, kind: StageKind, main_wall: Option<&Plane<T>>) -> Result<()> {
        while !self.full() {
            if self.run(kind, main_wall)?.is_none() {
                break;
            }
        }
        Ok(())
    }
}

/// Iterative multi-plane detection on the union of map and depth samples.
///
/// Order: horizontal planes, the main wall (two-point), walls parallel or
/// orthogonal to it (one-point), then any remaining vertical planes. Each
/// accepted plane's inliers leave the working set. Stops when a stage finds
/// nothing or `max_planes` is reached; deterministic for a fixed seed.
pub fn detect_all_planes<T: Real>(
    map_points: &[SamplePoint<T>],
    depth_points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    cfg: &RansacConfig<T>,
) -> Result<PlaneSet<T>> {
    cfg.validate()?;
    let mut det = Detector {
        working: map_points.iter().chain(depth_points).cloned().collect(),
        gravity,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        out: PlaneSet {
            planes: Vec::new(),
            stages: Vec::new(),
        },
    };
    det.repeat(StageKind::Horizontal, None)?;
    if !det.full() {
        if let Some(main) = det.run(StageKind::MainVertical, None)? {
            det.repeat(StageKind::Manhattan, Some(&main))?;
            det.repeat(StageKind::Vertical, None)?;
        }
    }
    Ok(det.out)
}
