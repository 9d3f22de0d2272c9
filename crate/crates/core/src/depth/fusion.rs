use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::MapPoint;
use crate::scalar::Real;

/// Result of one normal fusion step.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutcome<T: Real> {
    pub point: MapPoint<T>,
    /// Set when the weighted average vanished and the old normal was kept.
    pub degenerate: bool,
}

/// Distance-weighted normal fusion.
///
/// Each normal is weighted by the *other* measurement's distance, so the
/// closer observation dominates:
/// `n <- normalize((n_new * d + n * d_new) / (d_new + d))`, then `d <- d_new`.
/// `n_new` is flipped first if it points away from the stored normal.
pub fn fuse_normal<T: Real>(
    point: &MapPoint<T>,
    n_new: &Vector3<T>,
    d_new: T,
) -> Result<FusionOutcome<T>> {
    if !(d_new > T::zero()) || !d_new.is_finite() {
        return Err(Error::InvalidDepth(d_new.as_f64()));
    }
    let len = n_new.norm();
    if !(len > T::zero()) || !len.is_finite() {
        return Err(Error::InvalidInput("new normal has zero norm".into()));
    }
    let n_new = n_new / len;
    let mut out = point.clone();
    let (normal, distance) = match (point.normal, point.last_observed_distance) {
        (Some(n), Some(d)) => (n, d),
        _ => {
            out.normal = Some(n_new);
            out.last_observed_distance = Some(d_new);
            return Ok(FusionOutcome {
                point: out,
                degenerate: false,
            });
        }
    };
    let aligned = if n_new.dot(&normal) < T::zero() {
        -n_new
    } else {
        n_new
    };
    let avg = (aligned * distance + normal * d_new) / (d_new + distance);
    let norm = avg.norm();
    out.last_observed_distance = Some(d_new);
    if norm > T::default_epsilon() {
        out.normal = Some(avg / norm);
        Ok(FusionOutcome {
            point: out,
            degenerate: false,
        })
    } else {
        Ok(FusionOutcome {
            point: out,
            degenerate: true,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalEntry<T: Real> {
    pub normal: Vector3<T>,
    pub distance: T,
}

/// Immutable view of a [`NormalStore`], cheap to clone and to send across threads.
#[derive(Debug, Clone)]
pub struct NormalSnapshot<T: Real>(Arc<HashMap<u64, NormalEntry<T>>>);

impl<T: Real> NormalSnapshot<T> {
    pub fn get(&self, id: u64) -> Option<&NormalEntry<T>> {
        self.0.get(&id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Map-point id to fused normal and last observed distance.
///
/// Copy-on-write: snapshots taken with [`NormalStore::snapshot`] are never
/// affected by later fusion.
#[derive(Debug, Clone, Default)]
pub struct NormalStore<T: Real> {
    entries: Arc<HashMap<u64, NormalEntry<T>>>,
    degenerate: usize,
}

impl<T: Real> NormalStore<T> {
    pub fn new() -> Self {
        Self {
            entries: Arc::new(HashMap::new()),
            degenerate: 0,
        }
    }

    pub fn get(&self, id: u64) -> Option<&NormalEntry<T>> {
        self.entries.get(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of fusions that hit a vanishing average.
    pub fn degenerate_count(&self) -> usize {
        self.degenerate
    }

    pub fn fuse(&mut self, id: u64, n_new: &Vector3<T>, d_new: T) -> Result<NormalEntry<T>> {
        let mut point = MapPoint::new(id, Vector3::zeros());
        if let Some(e) = self.entries.get(&id) {
            point.normal = Some(e.normal);
            point.last_observed_distance = Some(e.distance);
        }
        let outcome = fuse_normal(&point, n_new, d_new)?;
        if outcome.degenerate {
            self.degenerate += 1;
        }
        let entry = NormalEntry {
            normal: outcome.point.normal.expect("fusion always sets a normal"),
            distance: d_new,
        };
        Arc::make_mut(&mut self.entries).insert(id, entry);
        Ok(entry)
    }

    pub fn snapshot(&self) -> NormalSnapshot<T> {
        NormalSnapshot(Arc::clone(&self.entries))
    }
}
