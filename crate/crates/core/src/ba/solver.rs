use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Matrix6x3, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::geometry::{huber_unchecked, huber_weight, Pose};
use crate::scalar::Real;

use super::config::SolverConfig;
use super::cost::{evaluate_cost, plane_energy, reprojection_energy, CostBreakdown};
use super::graph::{FactorGraph, View};
use super::jacobians::{linearize_plane, linearize_reprojection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct OptimizeReport<T: Real> {
    pub status: SolveStatus,
    /// Linearizations performed.
    pub iterations: usize,
    pub rejected_steps: usize,
    /// Cost of the optimized factors, initially and after each accepted step.
    pub cost_trace: Vec<T>,
    pub initial: CostBreakdown<T>,
    pub final_cost: CostBreakdown<T>,
    pub elapsed: Duration,
    pub message: Option<String>,
}

/// Variables and factors taking part in one solve.
struct Problem {
    poses: Vec<u64>,
    pose_index: HashMap<u64, usize>,
    points: Vec<u64>,
    point_index: HashMap<u64, usize>,
    reproj: Vec<usize>,
    plane: Vec<usize>,
}

impl Problem {
    fn new<T: Real>(
        graph: &FactorGraph<T>,
        free_poses: &BTreeSet<u64>,
        free_points: &BTreeSet<u64>,
        frames: Option<&BTreeSet<u64>>,
    ) -> Self {
        let poses: Vec<u64> = free_poses
            .iter()
            .copied()
            .filter(|id| graph.poses.contains_key(id) && !graph.fixed_poses.contains(id))
            .collect();
        let points: Vec<u64> = free_points
            .iter()
            .copied()
            .filter(|id| graph.points.contains_key(id))
            .collect();
        let pose_index: HashMap<u64, usize> = poses.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let point_index: HashMap<u64, usize> = points.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let reproj = graph
            .reproj_factors
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                graph.poses.contains_key(&f.obs.frame_id)
                    && graph.points.contains_key(&f.obs.point_id)
                    && frames.is_none_or(|s| s.contains(&f.obs.frame_id))
                    && (pose_index.contains_key(&f.obs.frame_id) || point_index.contains_key(&f.obs.point_id))
            })
            .map(|(i, _)| i)
            .collect();
        let plane = graph
            .plane_factors
            .iter()
            .enumerate()
            .filter(|(_, f)| point_index.contains_key(&f.point_id) && f.plane_index < graph.planes.len())
            .map(|(i, _)| i)
            .collect();
        Self {
            poses,
            pose_index,
            points,
            point_index,
            reproj,
            plane,
        }
    }

    /// Robust cost over the active factors, summed in the same order as
    /// [`evaluate_cost`].
    fn cost<T: Real>(&self, graph: &FactorGraph<T>, cfg: &SolverConfig<T>) -> T {
        let (mut left, mut right, mut plane) = (T::zero(), T::zero(), T::zero());
        for &i in &self.reproj {
            let f = &graph.reproj_factors[i];
            let pose = &graph.poses[&f.obs.frame_id];
            let x = &graph.points[&f.obs.point_id];
            if let Some((s, _)) = reprojection_energy(graph, pose, x, f) {
                let rho = huber_unchecked(s, cfg.huber_delta);
                match f.view {
                    View::Left => left += rho,
                    View::Right => right += rho,
                }
            }
        }
        for &i in &self.plane {
            let f = &graph.plane_factors[i];
            let s = plane_energy(&graph.planes[f.plane_index], &graph.points[&f.point_id], cfg.plane_sigma);
            plane += huber_unchecked(s, cfg.plane_huber_delta);
        }
        left + cfg.alpha * right + cfg.beta * plane
    }
}

/// Gauss-Newton blocks with IRLS weights; `b` is minus the gradient.
struct Linearized<T: Real> {
    hpp: Vec<Matrix6<T>>,
    bp: Vec<Vector6<T>>,
    hll: Vec<Matrix3<T>>,
    bl: Vec<Vector3<T>>,
    /// Per point: (pose index, H_pose_point block).
    hpl: Vec<Vec<(usize, Matrix6x3<T>)>>,
}

fn linearize<T: Real>(graph: &FactorGraph<T>, cfg: &SolverConfig<T>, pb: &Problem) -> Linearized<T> {
    let np = pb.poses.len();
    let nl = pb.points.len();
    let mut lin = Linearized {
        hpp: vec![Matrix6::zeros(); np],
        bp: vec![Vector6::zeros(); np],
        hll: vec![Matrix3::zeros(); nl],
        bl: vec![Vector3::zeros(); nl],
        hpl: vec![Vec::new(); nl],
    };
    let k = &graph.intrinsics;
    for &i in &pb.reproj {
        let f = &graph.reproj_factors[i];
        let pose = &graph.poses[&f.obs.frame_id];
        let x = &graph.points[&f.obs.point_id];
        let offset = match f.view {
            View::Left => T::zero(),
            View::Right => graph.baseline,
        };
        let Ok(l) = linearize_reprojection(pose, x, &f.obs.pixel, k, offset) else {
            continue;
        };
        let (u, _) = crate::depth::clamp_uncertainty(f.obs.uncertainty_u);
        let info = T::one() - u;
        let s = info * l.residual.norm_squared();
        let mut w = info * huber_weight(s, cfg.huber_delta);
        if f.view == View::Right {
            w *= cfg.alpha;
        }
        if w == T::zero() {
            continue;
        }
        let pi = pb.pose_index.get(&f.obs.frame_id).copied();
        let li = pb.point_index.get(&f.obs.point_id).copied();
        if let Some(a) = pi {
            let jt = l.d_pose.transpose() * w;
            lin.hpp[a] += jt * l.d_pose;
            lin.bp[a] -= jt * l.residual;
        }
        if let Some(p) = li {
            let jt = l.d_point.transpose() * w;
            lin.hll[p] += jt * l.d_point;
            lin.bl[p] -= jt * l.residual;
            if let Some(a) = pi {
                let block = l.d_pose.transpose() * w * l.d_point;
                match lin.hpl[p].iter_mut().find(|(idx, _)| *idx == a) {
                    Some((_, m)) => *m += block,
                    None => lin.hpl[p].push((a, block)),
                }
            }
        }
    }
    for &i in &pb.plane {
        let f = &graph.plane_factors[i];
        let p = pb.point_index[&f.point_id];
        let l = linearize_plane(&graph.planes[f.plane_index], &graph.points[&f.point_id], cfg.plane_sigma);
        let s = l.residual * l.residual;
        let w = cfg.beta * huber_weight(s, cfg.plane_huber_delta);
        let jt = l.d_point.transpose() * w;
        lin.hll[p] += jt * l.d_point;
        lin.bl[p] -= jt * l.residual;
    }
    lin
}

fn damp<const N: usize, T: Real>(
    m: &nalgebra::SMatrix<T, N, N>,
    lambda: T,
) -> nalgebra::SMatrix<T, N, N> {
    let mut out = *m;
    let floor = T::lit(1e-9);
    for i in 0..N {
        let d = m[(i, i)];
        out[(i, i)] = d + lambda * (if d > floor { d } else { floor });
    }
    out
}

/// Pose and point increments of one step.
type Step<T> = (Vec<Vector6<T>>, Vec<Vector3<T>>);

/// Solves the damped system by eliminating the point blocks.
fn solve_step<T: Real>(lin: &Linearized<T>, lambda: T) -> Option<Step<T>> {
    let np = lin.hpp.len();
    let mut hll_inv = Vec::with_capacity(lin.hll.len());
    for h in &lin.hll {
        hll_inv.push(damp(h, lambda).try_inverse()?);
    }
    let mut dp = vec![Vector6::zeros(); np];
    if np > 0 {
        let n = 6 * np;
        let mut s = DMatrix::<T>::zeros(n, n);
        let mut rhs = DVector::<T>::zeros(n);
        for a in 0..np {
            s.fixed_view_mut::<6, 6>(6 * a, 6 * a).copy_from(&damp(&lin.hpp[a], lambda));
            rhs.fixed_rows_mut::<6>(6 * a).copy_from(&lin.bp[a]);
        }
        for (p, blocks) in lin.hpl.iter().enumerate() {
            let inv = &hll_inv[p];
            for (a, wa) in blocks {
                let ya = wa * inv;
                let r = ya * lin.bl[p];
                let mut seg = rhs.fixed_rows_mut::<6>(6 * a);
                seg -= r;
                for (b, wb) in blocks {
                    let m = ya * wb.transpose();
                    let mut view = s.fixed_view_mut::<6, 6>(6 * a, 6 * b);
                    view -= m;
                }
            }
        }
        let chol = s.cholesky()?;
        let x = chol.solve(&rhs);
        for (a, d) in dp.iter_mut().enumerate() {
            *d = x.fixed_rows::<6>(6 * a).into_owned();
        }
    }
    let dl = lin
        .hll
        .iter()
        .enumerate()
        .map(|(p, _)| {
            let mut r = lin.bl[p];
            for (a, wa) in &lin.hpl[p] {
                r -= wa.transpose() * dp[*a];
            }
            hll_inv[p] * r
        })
        .collect();
    Some((dp, dl))
}

fn backup<T: Real>(graph: &FactorGraph<T>, pb: &Problem) -> (Vec<Pose<T>>, Vec<Vector3<T>>) {
    (
        pb.poses.iter().map(|id| graph.poses[id]).collect(),
        pb.points.iter().map(|id| graph.points[id]).collect(),
    )
}

fn restore<T: Real>(graph: &mut FactorGraph<T>, pb: &Problem, saved: &(Vec<Pose<T>>, Vec<Vector3<T>>)) {
    for (id, p) in pb.poses.iter().zip(&saved.0) {
        graph.poses.insert(*id, *p);
    }
    for (id, x) in pb.points.iter().zip(&saved.1) {
        graph.points.insert(*id, *x);
    }
}

fn apply_step<T: Real>(graph: &mut FactorGraph<T>, pb: &Problem, dp: &[Vector6<T>], dl: &[Vector3<T>]) {
    for (a, id) in pb.poses.iter().enumerate() {
        let pose = graph.poses.get_mut(id).expect("free pose exists");
        *pose = pose.retract(&dp[a]);
    }
    for (p, id) in pb.points.iter().enumerate() {
        *graph.points.get_mut(id).expect("free point exists") += dl[p];
    }
}

fn step_norm<T: Real>(dp: &[Vector6<T>], dl: &[Vector3<T>]) -> T {
    let mut m = T::zero();
    for v in dp.iter().map(|d| d.amax()).chain(dl.iter().map(|d| d.amax())) {
        if v > m {
            m = v;
        }
    }
    m
}

/// Optimizes every non-fixed pose and every point.
pub fn optimize<T: Real>(graph: &mut FactorGraph<T>, cfg: &SolverConfig<T>) -> Result<OptimizeReport<T>> {
    let poses: BTreeSet<u64> = graph.poses.keys().copied().collect();
    let points: BTreeSet<u64> = graph.points.keys().copied().collect();
    optimize_subset(graph, cfg, &poses, &points)
}

/// Optimizes the given poses and points, holding everything else constant.
/// Fixed poses stay fixed even when listed.
pub fn optimize_subset<T: Real>(
    graph: &mut FactorGraph<T>,
    cfg: &SolverConfig<T>,
    free_poses: &BTreeSet<u64>,
    free_points: &BTreeSet<u64>,
) -> Result<OptimizeReport<T>> {
    solve(graph, cfg, &Problem::new(graph, free_poses, free_points, None))
}

/// Like [`optimize_subset`], but only reprojection factors measured in
/// `frames` take part; frames outside the free set act as fixed anchors.
pub fn optimize_window<T: Real>(
    graph: &mut FactorGraph<T>,
    cfg: &SolverConfig<T>,
    free_poses: &BTreeSet<u64>,
    free_points: &BTreeSet<u64>,
    frames: &BTreeSet<u64>,
) -> Result<OptimizeReport<T>> {
    solve(graph, cfg, &Problem::new(graph, free_poses, free_points, Some(frames)))
}

fn solve<T: Real>(graph: &mut FactorGraph<T>, cfg: &SolverConfig<T>, pb: &Problem) -> Result<OptimizeReport<T>> {
    cfg.validate()?;
    graph.validate()?;
    let start = Instant::now();
    let initial = evaluate_cost(graph, cfg);
    let mut cost = pb.cost(graph, cfg);
    if !cost.is_finite() {
        return Err(Error::Domain("initial cost is not finite".into()));
    }
    let mut trace = vec![cost];
    let mut lambda = cfg.initial_lambda;
    let lambda_max = T::lit(1e12);
    let mut status = SolveStatus::MaxIterations;
    let mut message = None;
    let mut iterations = 0;
    let mut rejected = 0;

    if cost <= cfg.cost_floor || (pb.poses.is_empty() && pb.points.is_empty()) {
        status = SolveStatus::Converged;
    } else {
        'outer: while iterations < cfg.max_iterations {
            iterations += 1;
            let lin = linearize(graph, cfg, pb);
            loop {
                let step = solve_step(&lin, lambda);
                let Some((dp, dl)) = step else {
                    rejected += 1;
                    lambda *= T::lit(10.0);
                    if lambda > lambda_max {
                        status = SolveStatus::Diverged;
                        message = Some("damped system stayed singular".into());
                        break 'outer;
                    }
                    continue;
                };
                let tiny = step_norm(&dp, &dl) < T::lit(1e-12);
                let saved = backup(graph, pb);
                apply_step(graph, pb, &dp, &dl);
                let new_cost = pb.cost(graph, cfg);
                if new_cost.is_finite() && new_cost < cost {
                    let decrease = cost - new_cost;
                    trace.push(new_cost);
                    let prev = cost;
                    cost = new_cost;
                    lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                    if cost <= cfg.cost_floor || decrease <= cfg.epsilon * prev || tiny {
                        status = SolveStatus::Converged;
                        break 'outer;
                    }
                    break;
                }
                restore(graph, pb, &saved);
                rejected += 1;
                if tiny {
                    // Round-off floor: no representable improvement left.
                    status = SolveStatus::Converged;
                    break 'outer;
                }
                lambda *= T::lit(4.0);
                if lambda > lambda_max {
                    status = SolveStatus::Diverged;
                    message = Some(format!(
                        "no descent step found at cost {:.6e}",
                        cost.as_f64()
                    ));
                    break 'outer;
                }
            }
        }
    }
    Ok(OptimizeReport {
        status,
        iterations,
        rejected_steps: rejected,
        cost_trace: trace,
        initial,
        final_cost: evaluate_cost(graph, cfg),
        elapsed: start.elapsed(),
        message,
    })
}

/// Dense undamped normal equations `H dx = b` over the non-fixed poses
/// (6 columns each, in id order) followed by all points (3 each).
#[derive(Debug, Clone)]
pub struct NormalEquations<T: Real> {
    pub h: DMatrix<T>,
    pub b: DVector<T>,
    pub pose_ids: Vec<u64>,
    pub point_ids: Vec<u64>,
}

pub fn assemble_normal_equations<T: Real>(
    graph: &FactorGraph<T>,
    cfg: &SolverConfig<T>,
) -> Result<NormalEquations<T>> {
    cfg.validate()?;
    graph.validate()?;
    let poses: BTreeSet<u64> = graph.poses.keys().copied().collect();
    let points: BTreeSet<u64> = graph.points.keys().copied().collect();
    let pb = Problem::new(graph, &poses, &points, None);
    let lin = linearize(graph, cfg, &pb);
    let np = pb.poses.len();
    let n = 6 * np + 3 * pb.points.len();
    let mut h = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for a in 0..np {
        h.fixed_view_mut::<6, 6>(6 * a, 6 * a).copy_from(&lin.hpp[a]);
        b.fixed_rows_mut::<6>(6 * a).copy_from(&lin.bp[a]);
    }
    for p in 0..pb.points.len() {
        let o = 6 * np + 3 * p;
        h.fixed_view_mut::<3, 3>(o, o).copy_from(&lin.hll[p]);
        b.fixed_rows_mut::<3>(o).copy_from(&lin.bl[p]);
        for (a, w) in &lin.hpl[p] {
            h.fixed_view_mut::<6, 3>(6 * a, o).copy_from(w);
            h.fixed_view_mut::<3, 6>(o, 6 * a).copy_from(&w.transpose());
        }
    }
    Ok(NormalEquations {
        h,
        b,
        pose_ids: pb.poses,
        point_ids: pb.points,
    })
}

impl<T: Real> FactorGraph<T> {
    /// Camera-to-world poses in frame order.
    pub fn trajectory(&self) -> Vec<(u64, Pose<T>)> {
        self.poses.iter().map(|(&id, p)| (id, p.inverse())).collect()
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::ba::{attach_plane_factors, AttachMode};
    use crate::geometry::{project, Intrinsics, Observation};
    use crate::plane::{OrientationClass, Plane};

    /// Cameras on a line looking at points scattered on a floor patch and a wall.
    fn scene(noise: f64, seed: u64) -> (FactorGraph<f64>, FactorGraph<f64>) {
        let k = Intrinsics::new(200.0, 200.0, 160.0, 120.0, 320, 240).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gt = FactorGraph::new(k, 0.1);
        for i in 0..5u64 {
            let c = Vector3::new(-0.4 + 0.2 * i as f64, 0.0, -4.0);
            let pose = Pose::from_rotation_vector(Vector3::new(0.0, 0.02 * i as f64, 0.0), Vector3::zeros());
            let t = -(pose.rotation * c);
            gt.add_pose(i, Pose { translation: t, ..pose }, i == 0);
        }
        for j in 0..60u64 {
            let x = if j % 2 == 0 {
                Vector3::new(rng.random_range(-1.0..1.0), 0.8, rng.random_range(-1.0..1.0))
            } else {
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.8..0.8), 1.0)
            };
            gt.add_point(j, x);
        }
        let ids: Vec<(u64, u64)> = gt
            .poses
            .keys()
            .flat_map(|&f| gt.points.keys().map(move |&p| (f, p)))
            .collect();
        for (f, p) in ids {
            let px = project(&gt.poses[&f].transform_point(&gt.points[&p]), &k).unwrap();
            let obs = Observation { frame_id: f, point_id: p, pixel: px, uncertainty_u: 0.0 };
            gt.add_observation(obs, View::Left).unwrap();
            let right = gt.view_pose(&gt.poses[&f], View::Right);
            let pr = project(&right.transform_point(&gt.points[&p]), &k).unwrap();
            gt.add_observation(Observation { pixel: pr, ..obs }, View::Right).unwrap();
        }
        let mut noisy = gt.clone();
        for (id, pose) in noisy.poses.iter_mut() {
            if *id != 0 {
                let d = Vector6::from_fn(|_, _| noise * rng.random_range(-1.0..1.0));
                *pose = pose.retract(&d);
            }
        }
        for x in noisy.points.values_mut() {
            *x += Vector3::from_fn(|_, _| noise * rng.random_range(-1.0..1.0));
        }
        (gt, noisy)
    }

    #[test]
    fn recovers_noiseless_scene() {
        let (gt, mut g) = scene(0.01, 3);
        let report = optimize(&mut g, &SolverConfig::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        for (id, p) in &gt.poses {
            assert!((g.poses[id].translation - p.translation).norm() < 1e-8);
        }
        assert!(report.cost_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ground_truth_is_a_fixed_point() {
        let (mut gt, _) = scene(0.0, 4);
        let before = gt.clone();
        let report = optimize(&mut gt, &SolverConfig::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert!(report.iterations <= 1);
        for (id, p) in &before.poses {
            assert!((gt.poses[id].translation - p.translation).norm() < 1e-12);
        }
    }

    #[test]
    fn fixed_poses_do_not_move() {
        let (_, mut g) = scene(0.01, 5);
        let p0 = g.poses[&0];
        optimize(&mut g, &SolverConfig::default()).unwrap();
        assert_eq!(g.poses[&0], p0);
    }

    #[test]
    fn gauge_fixed_system_is_full_rank() {
        let (_, g) = scene(0.01, 6);
        let ne = assemble_normal_equations(&g, &SolverConfig::default()).unwrap();
        let n = ne.h.nrows();
        let svd = ne.h.clone().svd(false, false);
        let s = svd.singular_values;
        let rank = s.iter().filter(|&&v| v > s.max() * 1e-12).count();
        assert_eq!(rank, n);
    }

    #[test]
    fn plane_factors_only_touch_point_diagonal() {
        let (_, mut g) = scene(0.01, 7);
        let cfg = SolverConfig { beta: 0.5, ..SolverConfig::default() };
        let without = assemble_normal_equations(&g, &cfg).unwrap().h;
        let floor = Plane::new(Vector3::new(0.0, -1.0, 0.0), 0.8, OrientationClass::Horizontal).unwrap();
        attach_plane_factors(&mut g, vec![floor], 0.05, AttachMode::All);
        assert!(!g.plane_factors.is_empty());
        let ne = assemble_normal_equations(&g, &cfg).unwrap();
        let diff = &ne.h - &without;
        let np = 6 * ne.pose_ids.len();
        for r in 0..diff.nrows() {
            for c in 0..diff.ncols() {
                if diff[(r, c)] != 0.0 {
                    assert!(r >= np && c >= np && (r - np) / 3 == (c - np) / 3, "fill-in at {r},{c}");
                }
            }
        }
    }

    #[test]
    fn robust_cost_tolerates_an_outlier() {
        let (gt, mut g) = scene(0.005, 8);
        g.reproj_factors[10].obs.pixel += Vector2::new(40.0, -30.0);
        optimize(&mut g, &SolverConfig::default()).unwrap();
        let err: f64 = gt
            .poses
            .iter()
            .map(|(id, p)| (g.poses[id].center() - p.center()).norm())
            .fold(0.0, f64::max);
        assert!(err < 0.01, "max center error {err}");
    }
}
