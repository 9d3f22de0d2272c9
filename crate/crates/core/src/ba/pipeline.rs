use std::collections::{BTreeMap, BTreeSet};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use nalgebra::Vector3;

use crate::depth::{
    compute_normal_map, normal_from_depth, scale_correction, virtual_right_features, DepthFrame,
    NormalStore, ScaleMode, DEFAULT_NORMAL_SHIFT, MIN_SCALE_SAMPLES,
};
use crate::error::{Error, Result};
use crate::geometry::{unproject, GravityVector, Intrinsics, Observation, Pose};
use crate::plane::{detect_all_planes, sample_depth_points, Plane, PlaneSet, RansacConfig, SamplePoint, StageLog};
use crate::scalar::Real;

use super::config::SolverConfig;
use super::graph::{attach_plane_factors, FactorGraph, View};
use super::solver::{optimize_subset, optimize_window, OptimizeReport, SolveStatus};

/// One keyframe as delivered by the front-end.
#[derive(Debug, Clone)]
pub struct FrameInput<T: Real> {
    pub frame_id: u64,
    pub timestamp: f64,
    /// Predicted depth and uncertainty; `pose` is the front-end's
    /// camera-to-world estimate, used only through relative motion.
    pub depth: DepthFrame<T>,
    pub observations: Vec<Observation<T>>,
}

/// When detected planes reach the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefreshMode {
    /// Detect and apply before the same frame's solve.
    #[default]
    Synchronous,
    /// Detect on a worker thread; apply `lag` frames later.
    Asynchronous { lag: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T: Real> {
    pub solver: SolverConfig<T>,
    pub ransac: RansacConfig<T>,
    /// Weight factors by `1 - u`; otherwise every `u` is treated as 0.
    pub use_uncertainty: bool,
    /// Detect planes and add the plane term.
    pub use_planes: bool,
    /// Poses optimized by the local solve.
    pub window: usize,
    /// Besides the `2 window` most recent frames, every `anchor_stride`-th
    /// older frame contributes fixed observations to the local solve
    /// (0 disables).
    pub anchor_stride: usize,
    /// Motion-only iterations for a new frame before its depth is used.
    pub track_iterations: usize,
    pub local_iterations: usize,
    /// Iterations of the closing full adjustment; 0 skips it.
    pub full_iterations: usize,
    pub normal_shift: usize,
    /// Depth pixels sampled per plane refresh.
    pub depth_samples: usize,
    pub depth_stride: usize,
    pub scale_mode: ScaleMode,
    pub min_scale_samples: usize,
    pub refresh: RefreshMode,
}

impl<T: Real> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            ransac: RansacConfig::default(),
            use_uncertainty: true,
            use_planes: true,
            window: 10,
            anchor_stride: 5,
            track_iterations: 5,
            local_iterations: 5,
            full_iterations: 15,
            normal_shift: DEFAULT_NORMAL_SHIFT,
            depth_samples: 100,
            depth_stride: 4,
            scale_mode: ScaleMode::Median,
            min_scale_samples: MIN_SCALE_SAMPLES,
            refresh: RefreshMode::Synchronous,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefreshLog<T: Real> {
    /// Frame whose snapshot was used.
    pub frame_index: usize,
    /// Frame before whose solve the planes were attached.
    pub applied_at: usize,
    pub planes: Vec<Plane<T>>,
    pub trials: usize,
    pub elapsed: Duration,
    pub stages: Vec<StageLog>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveLog<T: Real> {
    pub frame_index: usize,
    pub status: SolveStatus,
    pub iterations: usize,
    pub initial_cost: T,
    pub final_cost: T,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput<T: Real> {
    /// Camera-to-world poses with the input timestamps.
    pub trajectory: Vec<(f64, Pose<T>)>,
    pub points: BTreeMap<u64, Vector3<T>>,
    pub planes: Vec<Plane<T>>,
    pub refreshes: Vec<RefreshLog<T>>,
    pub local_solves: Vec<SolveLog<T>>,
    pub full_solve: Option<OptimizeReport<T>>,
    pub scale_factors: Vec<T>,
    pub degenerate_normals: usize,
}

/// Snapshot handed to plane detection.
struct PlaneJob<T: Real> {
    map_points: Vec<SamplePoint<T>>,
    frame: DepthFrame<T>,
    gravity: GravityVector<T>,
    ransac: RansacConfig<T>,
    samples: usize,
    stride: usize,
    shift: usize,
}

impl<T: Real> PlaneJob<T> {
    fn run(self) -> Result<PlaneSet<T>> {
        let normals = compute_normal_map(&self.frame, self.shift);
        let depth_points = sample_depth_points(
            &self.frame,
            &normals,
            &crate::depth::ScaleCorrection::identity(),
            self.samples,
            self.stride,
            self.ransac.seed,
        )?;
        detect_all_planes(&self.map_points, &depth_points, &self.gravity, &self.ransac)
    }
}

struct Pending<T: Real> {
    frame_index: usize,
    apply_at: usize,
    rx: mpsc::Receiver<Result<PlaneSet<T>>>,
    handle: thread::JoinHandle<()>,
}

fn collect<T: Real>(p: Pending<T>) -> Result<(usize, PlaneSet<T>)> {
    let out = p
        .rx
        .recv()
        .map_err(|_| Error::InvalidInput("plane worker exited without a result".into()))?;
    p.handle
        .join()
        .map_err(|_| Error::InvalidInput("plane worker panicked".into()))?;
    Ok((p.frame_index, out?))
}

/// Sliding-window bundle adjustment over a keyframe stream with periodic
/// plane refreshes, followed by an optional full adjustment.
pub fn run_window_pipeline<T: Real>(
    frames: &[FrameInput<T>],
    intrinsics: Intrinsics<T>,
    baseline: T,
    gravity: &GravityVector<T>,
    cfg: &PipelineConfig<T>,
) -> Result<PipelineOutput<T>> {
    cfg.solver.validate()?;
    cfg.ransac.validate()?;
    if cfg.window == 0 {
        return Err(Error::InvalidInput("window must hold at least one pose".into()));
    }
    let period = cfg.solver.refresh_period;
    let mut graph = FactorGraph::new(intrinsics, baseline);
    let mut normals = NormalStore::new();
    let mut refreshes = Vec::new();
    let mut local_solves = Vec::new();
    let mut scale_factors = Vec::new();
    let mut pending: Vec<Pending<T>> = Vec::new();
    let mut frame_ids: Vec<u64> = Vec::new();
    let mut observers: BTreeMap<u64, usize> = BTreeMap::new();

    for (i, frame) in frames.iter().enumerate() {
        // Pose prior: previous estimate moved by the front-end's relative motion.
        let estimate: Pose<T> = if i == 0 {
            frame.depth.pose
        } else {
            let prev_opt = graph.poses[&frames[i - 1].frame_id].inverse();
            let rel = frames[i - 1].depth.pose.inverse().compose(&frame.depth.pose);
            prev_opt.compose(&rel)
        };
        graph.add_pose(frame.frame_id, estimate.inverse(), i == 0);
        frame_ids.push(frame.frame_id);

        let obs: Vec<Observation<T>> = frame
            .observations
            .iter()
            .map(|o| Observation {
                uncertainty_u: if cfg.use_uncertainty { o.uncertainty_u } else { T::zero() },
                ..*o
            })
            .collect();
        let (tracked, fresh): (Vec<Observation<T>>, Vec<Observation<T>>) =
            obs.into_iter().partition(|o| graph.points.contains_key(&o.point_id));
        for o in &tracked {
            graph.add_observation(*o, View::Left)?;
            *observers.entry(o.point_id).or_insert(0) += 1;
        }
        // Motion-only refinement against the existing map, so the scale
        // estimate below is not confounded by the odometry error.
        if i > 0 && cfg.track_iterations > 0 && tracked.len() >= cfg.min_scale_samples {
            let only: BTreeSet<u64> = [frame.frame_id].into();
            let solver = SolverConfig {
                max_iterations: cfg.track_iterations,
                ..cfg.solver
            };
            optimize_window(&mut graph, &solver, &only, &BTreeSet::new(), &only)?;
        }
        let estimate = graph.poses[&frame.frame_id].inverse();

        let mut depth = frame.depth.clone();
        depth.pose = estimate;
        let known: Vec<Vector3<T>> = tracked.iter().map(|o| graph.points[&o.point_id]).collect();
        let scale = if i == 0 {
            crate::depth::ScaleCorrection::identity()
        } else {
            scale_correction(&depth, &known, cfg.min_scale_samples, cfg.scale_mode)
        };
        scale_factors.push(scale.factor);
        let depth = depth.scaled(scale.factor);

        let mut kept: Vec<Observation<T>> = tracked.clone();
        for o in &fresh {
            let Some(d) = depth.sample_depth(&o.pixel) else { continue };
            let Ok(pc) = unproject(&o.pixel, d, &intrinsics) else { continue };
            graph.add_point(o.point_id, estimate.transform_point(&pc));
            graph.add_observation(*o, View::Left)?;
            *observers.entry(o.point_id).or_insert(0) += 1;
            kept.push(*o);
        }
        if cfg.solver.alpha > T::zero() {
            for r in virtual_right_features(&depth, &kept, baseline)? {
                graph.add_observation(r, View::Right)?;
                *observers.entry(r.point_id).or_insert(0) += 1;
            }
        }

        let center = estimate.translation;
        for o in &kept {
            let (x, y) = (o.pixel.x.as_f64().round(), o.pixel.y.as_f64().round());
            if x < 0.0 || y < 0.0 {
                continue;
            }
            if let Some(n) = normal_from_depth(&depth, x as usize, y as usize, cfg.normal_shift) {
                let dist = (graph.points[&o.point_id] - center).norm();
                normals.fuse(o.point_id, &n, dist)?;
            }
        }

        if cfg.use_planes && i % period == 0 {
            let map_points = graph
                .points
                .iter()
                .map(|(&id, x)| SamplePoint::map_point(id, *x, normals.get(id).map(|e| e.normal)))
                .collect();
            let job = PlaneJob {
                map_points,
                frame: depth.clone(),
                gravity: *gravity,
                ransac: RansacConfig {
                    seed: cfg.ransac.seed.wrapping_add(refreshes.len() as u64 + pending.len() as u64),
                    ..cfg.ransac
                },
                samples: cfg.depth_samples,
                stride: cfg.depth_stride,
                shift: cfg.normal_shift,
            };
            let lag = match cfg.refresh {
                RefreshMode::Synchronous => 0,
                RefreshMode::Asynchronous { lag } => lag,
            };
            let (tx, rx) = mpsc::channel();
            let handle = thread::spawn(move || {
                let _ = tx.send(job.run());
            });
            pending.push(Pending {
                frame_index: i,
                apply_at: i + lag,
                rx,
                handle,
            });
        }
        while pending.first().is_some_and(|p| p.apply_at <= i) {
            let (frame_index, set) = collect(pending.remove(0))?;
            refreshes.push(RefreshLog {
                frame_index,
                applied_at: i,
                planes: set.planes.clone(),
                trials: set.total_trials(),
                elapsed: set.elapsed(),
                stages: set.stages.clone(),
            });
            graph.planes = set.planes;
        }
        if cfg.use_planes {
            let planes = std::mem::take(&mut graph.planes);
            attach_plane_factors(&mut graph, planes, cfg.solver.theta, cfg.solver.attach_mode);
        }

        let window: BTreeSet<u64> = frame_ids.iter().rev().take(cfg.window).copied().collect();
        let mut visible: BTreeSet<u64> = frame_ids.iter().rev().take(2 * cfg.window).copied().collect();
        if cfg.anchor_stride > 0 {
            visible.extend(frame_ids.iter().step_by(cfg.anchor_stride).copied());
        }
        let free_points: BTreeSet<u64> = graph
            .reproj_factors
            .iter()
            .filter(|f| window.contains(&f.obs.frame_id) && observers[&f.obs.point_id] >= 2)
            .map(|f| f.obs.point_id)
            .collect();
        let solver = SolverConfig {
            max_iterations: cfg.local_iterations,
            ..cfg.solver
        };
        let report = optimize_window(&mut graph, &solver, &window, &free_points, &visible)?;
        local_solves.push(SolveLog {
            frame_index: i,
            status: report.status,
            iterations: report.iterations,
            initial_cost: report.cost_trace[0],
            final_cost: *report.cost_trace.last().expect("trace starts with the initial cost"),
        });
    }

    for p in pending.drain(..) {
        let (frame_index, set) = collect(p)?;
        refreshes.push(RefreshLog {
            frame_index,
            applied_at: frames.len(),
            planes: set.planes.clone(),
            trials: set.total_trials(),
            elapsed: set.elapsed(),
            stages: set.stages.clone(),
        });
        graph.planes = set.planes;
    }

    let full_solve = if cfg.full_iterations > 0 && !frames.is_empty() {
        if cfg.use_planes {
            let planes = std::mem::take(&mut graph.planes);
            attach_plane_factors(&mut graph, planes, cfg.solver.theta, cfg.solver.attach_mode);
        }
        let poses: BTreeSet<u64> = graph.poses.keys().copied().collect();
        let points: BTreeSet<u64> = graph
            .points
            .keys()
            .copied()
            .filter(|id| observers[id] >= 2)
            .collect();
        let solver = SolverConfig {
            max_iterations: cfg.full_iterations,
            ..cfg.solver
        };
        Some(optimize_subset(&mut graph, &solver, &poses, &points)?)
    } else {
        None
    };

    let trajectory = frames
        .iter()
        .map(|f| (f.timestamp, graph.poses[&f.frame_id].inverse()))
        .collect();
    Ok(PipelineOutput {
        trajectory,
        points: graph.points.clone(),
        planes: graph.planes.clone(),
        refreshes,
        local_solves,
        full_solve,
        scale_factors,
        degenerate_normals: normals.degenerate_count(),
    })
}
