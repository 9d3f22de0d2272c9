use planeba::ba::{run_window_pipeline, PipelineConfig, PipelineOutput, RefreshMode, SolverConfig};
use planeba::sim::{ate_rmse, generate, Dataset, GroundTruth, NoiseModel, SceneSpec};

fn scene(frames: usize, noiseless: bool) -> (Dataset, GroundTruth) {
    let mut s = SceneSpec::default_room().with_seed(4);
    s.trajectory.frames = frames;
    if noiseless {
        s.noise = NoiseModel::noiseless();
    }
    generate(&s).unwrap()
}

/// A cheap configuration: the tests check bookkeeping, not accuracy.
fn quick(period: usize) -> PipelineConfig<f64> {
    PipelineConfig {
        solver: SolverConfig { refresh_period: period, ..SolverConfig::default() },
        track_iterations: 2,
        local_iterations: 2,
        full_iterations: 0,
        depth_samples: 60,
        ..PipelineConfig::default()
    }
}

fn run(data: &Dataset, cfg: &PipelineConfig<f64>) -> PipelineOutput<f64> {
    run_window_pipeline(&data.frames, data.intrinsics, data.baseline, &data.gravity, cfg).unwrap()
}

#[test]
fn refreshes_follow_the_period() {
    let (data, _) = scene(90, false);
    let out = run(&data, &quick(30));
    let at: Vec<usize> = out.refreshes.iter().map(|r| r.frame_index).collect();
    assert_eq!(at, [0, 30, 60]);
    assert!(out.refreshes.iter().all(|r| r.applied_at == r.frame_index));
    assert_eq!(out.trajectory.len(), 90);

    let out = run(&data, &quick(200));
    assert_eq!(out.refreshes.len(), 1);
}

#[test]
fn no_planes_without_the_plane_term() {
    let (data, _) = scene(20, false);
    let out = run(&data, &PipelineConfig { use_planes: false, ..quick(5) });
    assert!(out.refreshes.is_empty());
    assert!(out.planes.is_empty());
}

#[test]
fn asynchronous_refresh_without_lag_matches_synchronous() {
    let (data, _) = scene(30, false);
    let sync = run(&data, &quick(10));
    let asy = run(&data, &PipelineConfig { refresh: RefreshMode::Asynchronous { lag: 0 }, ..quick(10) });
    assert_eq!(sync.trajectory, asy.trajectory);
    assert_eq!(sync.points, asy.points);

    let lagged = run(&data, &PipelineConfig { refresh: RefreshMode::Asynchronous { lag: 3 }, ..quick(10) });
    let applied: Vec<usize> = lagged.refreshes.iter().map(|r| r.applied_at).collect();
    assert_eq!(applied, [3, 13, 23]);
}

#[test]
fn noiseless_stream_is_tracked_exactly() {
    let (data, truth) = scene(25, true);
    let cfg = PipelineConfig { full_iterations: 10, ..PipelineConfig::default() };
    let out = run(&data, &cfg);
    let ate = ate_rmse(&out.trajectory, &truth.trajectory).unwrap();
    assert!(ate < 1e-4, "ATE {ate}");
    assert!(out.scale_factors.iter().all(|s| (s - 1.0).abs() < 1e-3), "{:?}", out.scale_factors);
}

#[test]
fn noisy_stream_beats_odometry() {
    let (data, truth) = scene(40, false);
    let odometry: Vec<_> = data.frames.iter().map(|f| (f.timestamp, f.depth.pose)).collect();
    let before = ate_rmse(&odometry, &truth.trajectory).unwrap();
    let out = run(&data, &PipelineConfig::default());
    let after = ate_rmse(&out.trajectory, &truth.trajectory).unwrap();
    assert!(after < before, "{after} vs odometry {before}");
    assert!(out.full_solve.is_some());
}

#[test]
fn empty_window_is_rejected() {
    let (data, _) = scene(3, true);
    let cfg = PipelineConfig { window: 0, ..quick(5) };
    assert!(run_window_pipeline(&data.frames, data.intrinsics, data.baseline, &data.gravity, &cfg).is_err());
}
