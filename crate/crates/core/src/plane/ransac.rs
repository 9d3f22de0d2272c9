use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::types::{deg_to_rad, OrientationClass, Plane, RansacConfig, SamplePoint, SourceId};
use crate::error::{Error, Result};
use crate::geometry::GravityVector;
use crate::scalar::Real;

/// RANSAC trial count `ceil(log(1 - p) / log(1 - w^n))`, at least 1.
pub fn ransac_iterations<T: Real>(p: T, w: T, n: u32) -> Result<usize> {
    let (p, w) = (p.as_f64(), w.as_f64());
    if !(p > 0.0 && p < 1.0) || !(w > 0.0 && w < 1.0) || !(1..=3).contains(&n) {
        return Err(Error::Domain(format!(
            "ransac_iterations needs 0<p<1, 0<w<1, n in 1..=3 (p={p}, w={w}, n={n})"
        )));
    }
    let k = (1.0 - p).ln() / (1.0 - w.powi(n as i32)).ln();
    Ok((k.ceil() as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RansacStats {
    /// Trial budget from the iteration formula.
    pub budget: usize,
    /// Hypotheses actually scored.
    pub trials: usize,
    /// Samples drawn, degenerate ones included.
    pub draws: usize,
    pub elapsed: Duration,
}

impl RansacStats {
    fn merge(&mut self, other: &RansacStats) {
        self.budget += other.budget;
        self.trials += other.trials;
        self.draws += other.draws;
        self.elapsed += other.elapsed;
    }
}

#[derive(Debug, Clone)]
pub struct RansacOutcome<T: Real> {
    pub plane: Option<Plane<T>>,
    /// Indices into the input slice of the accepted plane's inliers.
    pub inlier_indices: Vec<usize>,
    pub stats: RansacStats,
}

impl<T: Real> RansacOutcome<T> {
    fn rejected(stats: RansacStats) -> Self {
        Self {
            plane: None,
            inlier_indices: Vec::new(),
            stats,
        }
    }
}

#[derive(Clone, Copy)]
struct InlierTest<T: Real> {
    theta: T,
    cos_normal_tol: T,
}

impl<T: Real> InlierTest<T> {
    fn new(cfg: &RansacConfig<T>) -> Self {
        Self {
            theta: cfg.theta,
            cos_normal_tol: deg_to_rad(cfg.normal_tol_deg).cos(),
        }
    }

    /// Points without a normal are never rejected by the normal check.
    #[inline]
    fn normal_ok(&self, point: &SamplePoint<T>, normal: &Vector3<T>) -> bool {
        match &point.normal {
            Some(pn) => pn.dot(normal).abs() >= self.cos_normal_tol,
            None => true,
        }
    }

    #[inline]
    fn accepts(&self, point: &SamplePoint<T>, normal: &Vector3<T>, offset: T) -> bool {
        let p = &point.position;
        let dist = normal.x * p.x + normal.y * p.y + normal.z * p.z + offset;
        dist.abs() < self.theta && self.normal_ok(point, normal)
    }

    fn score(&self, points: &[SamplePoint<T>], normal: &Vector3<T>, offset: T) -> T {
        points
            .iter()
            .filter(|pt| self.accepts(pt, normal, offset))
            .fold(T::zero(), |acc, pt| acc + pt.weight)
    }

    fn inliers(&self, points: &[SamplePoint<T>], normal: &Vector3<T>, offset: T) -> Vec<usize> {
        points
            .iter()
            .enumerate()
            .filter(|(_, pt)| self.accepts(pt, normal, offset))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Weighted inlier sum of the hypothesis `(normal, offset)` under `cfg`.
pub fn weighted_inlier_score<T: Real>(
    points: &[SamplePoint<T>],
    normal: &Vector3<T>,
    offset: T,
    cfg: &RansacConfig<T>,
) -> T {
    InlierTest::new(cfg).score(points, normal, offset)
}

fn weighted_offset<T: Real>(points: &[SamplePoint<T>], idx: &[usize], normal: &Vector3<T>) -> T {
    let mut num = T::zero();
    let mut den = T::zero();
    for &i in idx {
        num += points[i].weight * normal.dot(&points[i].position);
        den += points[i].weight;
    }
    -num / den
}

/// Builds the accepted plane, or rejects it below the inlier threshold.
fn finalize<T: Real>(
    points: &[SamplePoint<T>],
    normal: Vector3<T>,
    offset: T,
    class: OrientationClass,
    cfg: &RansacConfig<T>,
    stats: RansacStats,
) -> RansacOutcome<T> {
    let test = InlierTest::new(cfg);
    let idx = test.inliers(points, &normal, offset);
    let weight = idx.iter().fold(T::zero(), |acc, &i| acc + points[i].weight);
    if idx.is_empty() || weight < cfg.min_inliers_for(points.len()) {
        return RansacOutcome::rejected(stats);
    }
    let mut ids: Vec<u64> = idx
        .iter()
        .filter_map(|&i| match points[i].source {
            SourceId::MapPoint(id) => Some(id),
            SourceId::DepthPixel { .. } => None,
        })
        .collect();
    ids.sort_unstable();
    RansacOutcome {
        plane: Some(Plane {
            normal,
            offset,
            class,
            inlier_ids: ids,
            inlier_weight: weight,
        }),
        inlier_indices: idx,
        stats,
    }
}

/// One-point RANSAC over the offset of a plane with a fixed normal.
/// Returns the best offset (ties keep the earliest trial) with its score.
fn fixed_normal_search<T: Real, R: Rng>(
    points: &[SamplePoint<T>],
    normal: &Vector3<T>,
    cfg: &RansacConfig<T>,
    rng: &mut R,
    stats: &mut RansacStats,
) -> Option<(T, T)> {
    let test = InlierTest::new(cfg);
    let mut best: Option<(T, T)> = None;
    while stats.trials < stats.budget && stats.draws < cfg.max_draws {
        stats.draws += 1;
        let pt = &points[rng.random_range(0..points.len())];
        if !test.normal_ok(pt, normal) {
            continue;
        }
        stats.trials += 1;
        let offset = -normal.dot(&pt.position);
        let score = test.score(points, normal, offset);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((offset, score));
        }
    }
    best
}

/// Rounds of inlier re-selection and refitting after the sample search.
const REFIT_ROUNDS: usize = 5;

fn refit_offset<T: Real>(
    points: &[SamplePoint<T>],
    normal: &Vector3<T>,
    offset: T,
    cfg: &RansacConfig<T>,
) -> T {
    let test = InlierTest::new(cfg);
    let mut offset = offset;
    for _ in 0..REFIT_ROUNDS {
        let idx = test.inliers(points, normal, offset);
        if idx.is_empty() {
            break;
        }
        let next = weighted_offset(points, &idx, normal);
        if next == offset {
            break;
        }
        offset = next;
    }
    offset
}

pub(crate) fn horizontal_with<T: Real, R: Rng>(
    points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    cfg: &RansacConfig<T>,
    rng: &mut R,
) -> Result<RansacOutcome<T>> {
    cfg.validate()?;
    let start = Instant::now();
    let mut stats = RansacStats {
        budget: ransac_iterations(cfg.p, cfg.w, 1)?,
        ..Default::default()
    };
    if points.is_empty() {
        return Ok(RansacOutcome::rejected(stats));
    }
    let normal = gravity.up();
    let best = fixed_normal_search(points, &normal, cfg, rng, &mut stats);
    let outcome = match best {
        None => RansacOutcome::rejected(stats),
        Some((offset, _)) => {
            let offset = refit_offset(points, &normal, offset, cfg);
            finalize(points, normal, offset, OrientationClass::Horizontal, cfg, stats)
        }
    };
    Ok(with_elapsed(outcome, start))
}

fn with_elapsed<T: Real>(mut outcome: RansacOutcome<T>, start: Instant) -> RansacOutcome<T> {
    outcome.stats.elapsed = start.elapsed();
    outcome
}

/// Orthonormal basis of the plane orthogonal to gravity.
fn horizontal_basis<T: Real>(gravity: &GravityVector<T>) -> (Vector3<T>, Vector3<T>) {
    let g = gravity.direction();
    let helper = if g.x.abs() < T::lit(0.9) {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = (helper - g * g.dot(&helper)).normalize();
    let e2 = g.cross(&e1);
    (e1, e2)
}

/// Weighted total least squares for a gravity-orthogonal normal.
fn refit_vertical_once<T: Real>(
    points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    normal: &Vector3<T>,
    offset: T,
    cfg: &RansacConfig<T>,
) -> (Vector3<T>, T) {
    let idx = InlierTest::new(cfg).inliers(points, normal, offset);
    if idx.len() < 2 {
        return (*normal, offset);
    }
    let (e1, e2) = horizontal_basis(gravity);
    let mut wsum = T::zero();
    let mut mean = Vector2::zeros();
    for &i in &idx {
        let p = &points[i].position;
        let q = Vector2::new(e1.dot(p), e2.dot(p));
        mean += q * points[i].weight;
        wsum += points[i].weight;
    }
    mean /= wsum;
    let mut cov = Matrix2::zeros();
    for &i in &idx {
        let p = &points[i].position;
        let q = Vector2::new(e1.dot(p), e2.dot(p)) - mean;
        cov += q * q.transpose() * points[i].weight;
    }
    let eig = cov.symmetric_eigen();
    let k = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
        0
    } else {
        1
    };
    let n2 = eig.eigenvectors.column(k);
    let mut refit = (e1 * n2[0] + e2 * n2[1]).normalize();
    if refit.dot(normal) < T::zero() {
        refit = -refit;
    }
    let refit_offset = -(refit.dot(&e1) * mean.x + refit.dot(&e2) * mean.y);
    // the mean was taken in the horizontal plane; the normal has no vertical part
    (refit, refit_offset)
}

fn refit_vertical<T: Real>(
    points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    normal: &Vector3<T>,
    offset: T,
    cfg: &RansacConfig<T>,
) -> (Vector3<T>, T) {
    let (mut normal, mut offset) = (*normal, offset);
    for _ in 0..REFIT_ROUNDS {
        let (n, d) = refit_vertical_once(points, gravity, &normal, offset, cfg);
        if n == normal && d == offset {
            break;
        }
        (normal, offset) = (n, d);
    }
    (normal, offset)
}

pub(crate) fn vertical_with<T: Real, R: Rng>(
    points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    cfg: &RansacConfig<T>,
    rng: &mut R,
) -> Result<RansacOutcome<T>> {
    cfg.validate()?;
    let start = Instant::now();
    let mut stats = RansacStats {
        budget: ransac_iterations(cfg.p, cfg.w, 2)?,
        ..Default::default()
    };
    if points.len() < 2 {
        return Ok(RansacOutcome::rejected(stats));
    }
    let test = InlierTest::new(cfg);
    let g = *gravity.direction();
    let eps = T::lit(1e-6);
    let mut best: Option<(Vector3<T>, T, T)> = None;
    while stats.trials < stats.budget && stats.draws < cfg.max_draws {
        stats.draws += 1;
        let i = rng.random_range(0..points.len());
        let j = rng.random_range(0..points.len());
        if i == j {
            continue;
        }
        let (a, b) = (&points[i], &points[j]);
        let diff = b.position - a.position;
        let horizontal = diff - g * g.dot(&diff);
        if horizontal.norm() < eps {
            continue;
        }
        let normal = g.cross(&horizontal).normalize();
        if !test.normal_ok(a, &normal) || !test.normal_ok(b, &normal) {
            continue;
        }
        stats.trials += 1;
        let offset = -normal.dot(&a.position);
        let score = test.score(points, &normal, offset);
        if best.as_ref().is_none_or(|&(_, _, s)| score > s) {
            best = Some((normal, offset, score));
        }
    }
    let outcome = match best {
        None => RansacOutcome::rejected(stats),
        Some((normal, offset, _)) => {
            let (normal, offset) = refit_vertical(points, gravity, &normal, offset, cfg);
            finalize(points, normal, offset, OrientationClass::Vertical, cfg, stats)
        }
    };
    Ok(with_elapsed(outcome, start))
}

pub(crate) fn manhattan_with<T: Real, R: Rng>(
    points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    main_wall: &Plane<T>,
    cfg: &RansacConfig<T>,
    rng: &mut R,
) -> Result<RansacOutcome<T>> {
    cfg.validate()?;
    if main_wall.class != OrientationClass::Vertical {
        return Err(Error::InvalidInput(
            "Manhattan detection needs a vertical main wall".into(),
        ));
    }
    let start = Instant::now();
    let k = ransac_iterations(cfg.p, cfg.w, 1)?;
    let mut total = RansacStats::default();
    if points.is_empty() {
        total.budget = 2 * k;
        return Ok(RansacOutcome::rejected(total));
    }
    let parallel = main_wall.normal;
    let orthogonal = gravity.direction().cross(&parallel).normalize();
    let mut best: Option<(Vector3<T>, T, T)> = None;
    for normal in [parallel, orthogonal] {
        let mut stats = RansacStats {
            budget: k,
            ..Default::default()
        };
        if let Some((offset, _)) = fixed_normal_search(points, &normal, cfg, rng, &mut stats) {
            let offset = refit_offset(points, &normal, offset, cfg);
            let score = InlierTest::new(cfg).score(points, &normal, offset);
            if best.as_ref().is_none_or(|&(_, _, s)| score > s) {
                best = Some((normal, offset, score));
            }
        }
        total.merge(&stats);
    }
    let outcome = match best {
        None => RansacOutcome::rejected(total),
        Some((normal, offset, _)) => {
            let (normal, offset) = refit_vertical(points, gravity, &normal, offset, cfg);
            finalize(points, normal, offset, OrientationClass::Vertical, cfg, total)
        }
    };
    Ok(with_elapsed(outcome, start))
}

/// Unconstrained three-point RANSAC, the reference for the reduced-sample
/// detectors. Not used by the multi-plane pipeline.
pub(crate) fn three_point_with<T: Real, R: Rng>(
    points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    cfg: &RansacConfig<T>,
    rng: &mut R,
) -> Result<RansacOutcome<T>> {
    cfg.validate()?;
    let start = Instant::now();
    let mut stats = RansacStats {
        budget: ransac_iterations(cfg.p, cfg.w, 3)?,
        ..Default::default()
    };
    if points.len() < 3 {
        return Ok(RansacOutcome::rejected(stats));
    }
    let test = InlierTest::new(cfg);
    let mut best: Option<(Vector3<T>, T, T)> = None;
    while stats.trials < stats.budget && stats.draws < cfg.max_draws {
        stats.draws += 1;
        let i = rng.random_range(0..points.len());
        let j = rng.random_range(0..points.len());
        let l = rng.random_range(0..points.len());
        if i == j || j == l || i == l {
            continue;
        }
        let (a, b, c) = (&points[i], &points[j], &points[l]);
        let cross = (b.position - a.position).cross(&(c.position - a.position));
        let norm = cross.norm();
        if norm < T::lit(1e-9) {
            continue;
        }
        let normal = cross / norm;
        if !test.normal_ok(a, &normal) || !test.normal_ok(b, &normal) || !test.normal_ok(c, &normal)
        {
            continue;
        }
        stats.trials += 1;
        let offset = -normal.dot(&a.position);
        let score = test.score(points, &normal, offset);
        if best.as_ref().is_none_or(|&(_, _, s)| score > s) {
            best = Some((normal, offset, score));
        }
    }
    let outcome = match best {
        None => RansacOutcome::rejected(stats),
        Some((normal, offset, _)) => {
            let c = normal.dot(gravity.direction()).abs();
            let tol = deg_to_rad(cfg.angle_tol_deg);
            let class = if c > tol.cos() {
                OrientationClass::Horizontal
            } else if c < tol.sin() {
                OrientationClass::Vertical
            } else {
                OrientationClass::General
            };
            finalize(points, normal, offset, class, cfg, stats)
        }
    };
    Ok(with_elapsed(outcome, start))
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One-point RANSAC for a plane orthogonal to gravity.
pub fn detect_horizontal<T: Real>(
    points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    cfg: &RansacConfig<T>,
) -> Result<RansacOutcome<T>> {
    horizontal_with(points, gravity, cfg, &mut rng_for(cfg.seed))
}

/// Two-point RANSAC for a plane containing the gravity direction.
pub fn detect_vertical<T: Real>(
    points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    cfg: &RansacConfig<T>,
) -> Result<RansacOutcome<T>> {
    vertical_with(points, gravity, cfg, &mut rng_for(cfg.seed))
}

/// One-point RANSAC for walls parallel or orthogonal to `main_wall`.
pub fn detect_manhattan<T: Real>(
    points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    main_wall: &Plane<T>,
    cfg: &RansacConfig<T>,
) -> Result<RansacOutcome<T>> {
    manhattan_with(points, gravity, main_wall, cfg, &mut rng_for(cfg.seed))
}

/// Three-point RANSAC without the gravity prior.
pub fn detect_three_point<T: Real>(
    points: &[SamplePoint<T>],
    gravity: &GravityVector<T>,
    cfg: &RansacConfig<T>,
) -> Result<RansacOutcome<T>> {
    three_point_with(points, gravity, cfg, &mut rng_for(cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gravity() -> GravityVector<f64> {
        GravityVector::new(Vector3::new(0.0, 0.0, -1.0)).unwrap()
    }

    fn grid_on_floor(n_side: usize, z: f64) -> Vec<SamplePoint<f64>> {
        let mut pts = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                let id = (i * n_side + j) as u64;
                let p = Vector3::new(i as f64 * 0.2, j as f64 * 0.2, z);
                pts.push(SamplePoint::map_point(id, p, None));
            }
        }
        pts
    }

    fn wall_x(x: f64, count: usize, id0: u64) -> Vec<SamplePoint<f64>> {
        (0..count)
            .map(|i| {
                let p = Vector3::new(x, (i % 20) as f64 * 0.2, (i / 20) as f64 * 0.2);
                SamplePoint::map_point(id0 + i as u64, p, Some(Vector3::new(-1.0, 0.0, 0.0)))
            })
            .collect()
    }

    #[test]
    fn iteration_counts_follow_formula() {
        assert_eq!(ransac_iterations(0.99, 0.2, 1).unwrap(), 21);
        assert_eq!(ransac_iterations(0.99, 0.2, 2).unwrap(), 113);
        assert_eq!(ransac_iterations(0.99, 0.2, 3).unwrap(), 574);
        assert_eq!(ransac_iterations(1e-12, 0.2, 1).unwrap(), 1);
        assert!(ransac_iterations(1.0, 0.2, 1).is_err());
        assert!(ransac_iterations(0.5, 0.0, 1).is_err());
        assert!(ransac_iterations(0.5, 0.5, 4).is_err());
    }

    #[test]
    fn noiseless_floor_recovered_exactly() {
        let pts = grid_on_floor(15, 0.0);
        let out = detect_horizontal(&pts, &gravity(), &RansacConfig::default()).unwrap();
        let plane = out.plane.unwrap();
        assert_eq!(plane.coeffs(), nalgebra::Vector4::new(0.0, 0.0, 1.0, 0.0));
        assert_eq!(plane.inlier_ids.len(), 225);
        assert_eq!(out.stats.trials, out.stats.budget);
    }

    #[test]
    fn empty_input_gives_none() {
        let cfg = RansacConfig::default();
        assert!(detect_horizontal(&[], &gravity(), &cfg).unwrap().plane.is_none());
        assert!(detect_vertical(&[], &gravity(), &cfg).unwrap().plane.is_none());
        assert!(detect_three_point(&[], &gravity(), &cfg).unwrap().plane.is_none());
    }

    #[test]
    fn noiseless_wall_recovered() {
        let pts = wall_x(2.0, 200, 0);
        let out = detect_vertical(&pts, &gravity(), &RansacConfig::default()).unwrap();
        let plane = out.plane.unwrap();
        assert!((plane.normal.x.abs() - 1.0).abs() < 1e-12);
        assert!((plane.offset + 2.0 * plane.normal.x).abs() < 1e-12);
        assert_eq!(plane.class, OrientationClass::Vertical);
    }

    #[test]
    fn colinear_floor_cluster_rejected_as_wall() {
        // points on a line lying on the floor, carrying floor normals
        let pts: Vec<_> = (0..100)
            .map(|i| {
                SamplePoint::map_point(
                    i,
                    Vector3::new(1.0 + i as f64 * 0.02, 2.0, 0.0),
                    Some(Vector3::new(0.0, 0.0, 1.0)),
                )
            })
            .collect();
        let out = detect_vertical(&pts, &gravity(), &RansacConfig::default()).unwrap();
        assert!(out.plane.is_none());
        assert_eq!(out.stats.trials, 0);
        assert_eq!(out.stats.draws, 10_000);
        // without normals the same cluster does produce a spurious wall
        let bare: Vec<_> = pts
            .iter()
            .map(|p| SamplePoint { normal: None, ..p.clone() })
            .collect();
        assert!(detect_vertical(&bare, &gravity(), &RansacConfig::default())
            .unwrap()
            .plane
            .is_some());
    }

    #[test]
    fn manhattan_finds_orthogonal_and_parallel() {
        let g = gravity();
        let main = Plane::new(Vector3::new(1.0, 0.0, 0.0), -2.0, OrientationClass::Vertical).unwrap();
        let ortho: Vec<_> = (0..200)
            .map(|i| {
                let p = Vector3::new((i % 20) as f64 * 0.2, 4.0, (i / 20) as f64 * 0.2);
                SamplePoint::map_point(i, p, Some(Vector3::new(0.0, -1.0, 0.0)))
            })
            .collect();
        let out = detect_manhattan(&ortho, &g, &main, &RansacConfig::default()).unwrap();
        let plane = out.plane.unwrap();
        assert!((plane.normal.y.abs() - 1.0).abs() < 1e-12);
        assert!((plane.signed_distance(&Vector3::new(0.0, 4.0, 0.0))).abs() < 1e-12);
        assert_eq!(out.stats.budget, 2 * 44);

        let parallel = wall_x(-1.0, 200, 1000);
        let out = detect_manhattan(&parallel, &g, &main, &RansacConfig::default()).unwrap();
        let plane = out.plane.unwrap();
        assert_eq!(plane.normal, main.normal);
        assert!((plane.offset - 1.0).abs() < 1e-12);
    }

    #[test]
    fn manhattan_ignores_diagonal_wall() {
        let g = gravity();
        let main = Plane::new(Vector3::new(1.0, 0.0, 0.0), -2.0, OrientationClass::Vertical).unwrap();
        let n = Vector3::new(1.0, 1.0, 0.0).normalize();
        let diag: Vec<_> = (0..300)
            .map(|i| {
                let s = (i % 20) as f64 * 0.2;
                let p = Vector3::new(s, 3.0 - s, (i / 20) as f64 * 0.2);
                SamplePoint::map_point(i, p, Some(-n))
            })
            .collect();
        let out = detect_manhattan(&diag, &g, &main, &RansacConfig::default()).unwrap();
        assert!(out.plane.is_none());
        let v = detect_vertical(&diag, &g, &RansacConfig::default()).unwrap();
        let plane = v.plane.unwrap();
        assert!(plane.normal.dot(&n).abs() > 0.9999);
    }

    #[test]
    fn manhattan_needs_vertical_main_wall() {
        let floor = Plane::new(Vector3::new(0.0, 0.0, 1.0), 0.0, OrientationClass::Horizontal).unwrap();
        let pts = grid_on_floor(5, 0.0);
        assert!(detect_manhattan(&pts, &gravity(), &floor, &RansacConfig::default()).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut pts = grid_on_floor(10, 0.0);
        pts.extend(wall_x(2.0, 120, 500));
        let cfg = RansacConfig {
            seed: 42,
            ..Default::default()
        };
        let a = detect_vertical(&pts, &gravity(), &cfg).unwrap();
        let b = detect_vertical(&pts, &gravity(), &cfg).unwrap();
        assert_eq!(a.plane, b.plane);
        assert_eq!(a.inlier_indices, b.inlier_indices);
    }

    #[test]
    fn three_point_classifies() {
        let pts = grid_on_floor(12, 0.5);
        let out = detect_three_point(&pts, &gravity(), &RansacConfig::default()).unwrap();
        let plane = out.plane.unwrap();
        assert_eq!(plane.class, OrientationClass::Horizontal);
        assert!((plane.signed_distance(&Vector3::new(3.0, 3.0, 0.5))).abs() < 1e-12);
    }
}
