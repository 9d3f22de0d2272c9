//! Ablation runs over simulator seeds, summary tables and paired comparison.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ba::{run_window_pipeline, PipelineConfig, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::plane::{PlaneRecord, RansacConfig};
use crate::sim::{ate_rmse, generate, write_trajectory, Dataset, GroundTruth, SceneSpec, Trajectory};

/// The four system variants of the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "+P")]
    Planes,
    #[serde(rename = "+U")]
    Uncertainty,
    #[serde(rename = "+U+P")]
    UncertaintyPlanes,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Baseline,
        Variant::Planes,
        Variant::Uncertainty,
        Variant::UncertaintyPlanes,
    ];

    pub fn use_uncertainty(self) -> bool {
        matches!(self, Variant::Uncertainty | Variant::UncertaintyPlanes)
    }

    pub fn use_planes(self) -> bool {
        matches!(self, Variant::Planes | Variant::UncertaintyPlanes)
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Planes => "+P",
            Variant::Uncertainty => "+U",
            Variant::UncertaintyPlanes => "+U+P",
        }
    }

    /// File-system friendly name.
    pub fn slug(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Planes => "plus_p",
            Variant::Uncertainty => "plus_u",
            Variant::UncertaintyPlanes => "plus_u_p",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label().eq_ignore_ascii_case(s) || v.slug() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant '{s}'")))
    }
}

/// A scene given inline or as a path to a JSON scene spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneSource {
    Path(PathBuf),
    Inline(Box<SceneSpec>),
}

impl Default for SceneSource {
    fn default() -> Self {
        SceneSource::Inline(Box::new(SceneSpec::default_room()))
    }
}

impl SceneSource {
    /// Relative paths resolve against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<SceneSpec> {
        match self {
            SceneSource::Inline(spec) => Ok((**spec).clone()),
            SceneSource::Path(p) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneSource,
    /// Each seed drives both the simulator and RANSAC.
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub ransac_w: f64,
    pub ransac_p: f64,
    pub refresh_period: usize,
    pub huber_delta: f64,
    pub plane_huber_delta: f64,
    pub plane_sigma: f64,
    pub window: usize,
    pub anchor_stride: usize,
    pub track_iterations: usize,
    pub local_iterations: usize,
    pub full_iterations: usize,
    pub depth_samples: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = PipelineConfig::<f64>::default();
        Self {
            scene: SceneSource::default(),
            seeds: (0..5).collect(),
            variants: Variant::ALL.to_vec(),
            alpha: p.solver.alpha,
            beta: p.solver.beta,
            theta: p.solver.theta,
            ransac_w: p.ransac.w,
            ransac_p: p.ransac.p,
            refresh_period: p.solver.refresh_period,
            huber_delta: p.solver.huber_delta,
            plane_huber_delta: p.solver.plane_huber_delta,
            plane_sigma: p.solver.plane_sigma,
            window: p.window,
            anchor_stride: p.anchor_stride,
            track_iterations: p.track_iterations,
            local_iterations: p.local_iterations,
            full_iterations: p.full_iterations,
            depth_samples: p.depth_samples,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("at least one seed is required".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::InvalidInput("seeds must be distinct".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidInput("at least one variant is required".into()));
        }
        if self.variants.iter().collect::<BTreeSet<_>>().len() != self.variants.len() {
            return Err(Error::InvalidInput("variants must be distinct".into()));
        }
        self.pipeline_config(Variant::UncertaintyPlanes, 0).solver.validate()?;
        self.pipeline_config(Variant::UncertaintyPlanes, 0).ransac.validate()
    }

    pub fn pipeline_config(&self, variant: Variant, seed: u64) -> PipelineConfig<f64> {
        let base = PipelineConfig::<f64>::default();
        PipelineConfig {
            solver: SolverConfig {
                alpha: self.alpha,
                beta: self.beta,
                theta: self.theta,
                refresh_period: self.refresh_period,
                huber_delta: self.huber_delta,
                plane_huber_delta: self.plane_huber_delta,
                plane_sigma: self.plane_sigma,
                ..base.solver
            },
            ransac: RansacConfig {
                w: self.ransac_w,
                p: self.ransac_p,
                theta: self.theta,
                seed,
                ..base.ransac
            },
            use_uncertainty: variant.use_uncertainty(),
            use_planes: variant.use_planes(),
            window: self.window,
            anchor_stride: self.anchor_stride,
            track_iterations: self.track_iterations,
            local_iterations: self.local_iterations,
            full_iterations: self.full_iterations,
            depth_samples: self.depth_samples,
            ..base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefreshSummary {
    pub frame_index: usize,
    pub applied_at: usize,
    pub trials: usize,
    pub planes: Vec<PlaneRecord>,
    pub detect_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub status: RunStatus,
    pub ate_rmse: Option<f64>,
    pub error: Option<String>,
    pub solver_status: Option<SolveStatus>,
    pub iterations: usize,
    /// Cost of the closing full adjustment after each accepted step.
    pub cost_trace: Vec<f64>,
    pub refreshes: Vec<RefreshSummary>,
    pub run_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: Variant,
    pub seeds: Vec<SeedRun>,
    /// Median over completed seeds only.
    pub median_ate: Option<f64>,
    pub completed: usize,
    pub failed: usize,
}

impl RunReport {
    fn new(variant: Variant, seeds: Vec<SeedRun>) -> Self {
        let ates: Vec<f64> = seeds
            .iter()
            .filter(|s| s.status == RunStatus::Completed)
            .filter_map(|s| s.ate_rmse)
            .collect();
        Self {
            variant,
            completed: ates.len(),
            failed: seeds.len() - ates.len(),
            median_ate: median(ates),
            seeds,
        }
    }

    pub fn rows(&self) -> Vec<SummaryRow> {
        self.seeds
            .iter()
            .map(|s| SummaryRow {
                variant: self.variant,
                seed: s.seed,
                ate_rmse: s.ate_rmse,
                status: s.status,
            })
            .collect()
    }
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: Variant,
    pub seed: u64,
    pub ate_rmse: Option<f64>,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantMedian {
    pub variant: Variant,
    pub median_ate: Option<f64>,
    pub completed: usize,
    pub failed: usize,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub medians: Vec<VariantMedian>,
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunReport>,
}

impl ExperimentReport {
    pub fn run(&self, variant: Variant) -> Option<&RunReport> {
        self.runs.iter().find(|r| r.variant == variant)
    }

    pub fn rows(&self) -> Vec<SummaryRow> {
        self.runs.iter().flat_map(RunReport::rows).collect()
    }

    pub fn summary(&self) -> Summary {
        Summary {
            medians: self
                .runs
                .iter()
                .map(|r| VariantMedian {
                    variant: r.variant,
                    median_ate: r.median_ate,
                    completed: r.completed,
                    failed: r.failed,
                })
                .collect(),
            rows: self.rows(),
        }
    }

    /// True when no run of any variant completed.
    pub fn all_failed(&self) -> bool {
        self.runs.iter().all(|r| r.completed == 0)
    }
}

pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

struct JobOutput {
    run: SeedRun,
    trajectory: Option<Trajectory>,
}

fn run_one(cfg: &ExperimentConfig, variant: Variant, seed: u64, scene: &Result<(Dataset, GroundTruth), String>) -> JobOutput {
    let start = Instant::now();
    let failed = |msg: String, start: Instant| JobOutput {
        run: SeedRun {
            seed,
            status: RunStatus::Failed,
            ate_rmse: None,
            error: Some(msg),
            solver_status: None,
            iterations: 0,
            cost_trace: Vec::new(),
            refreshes: Vec::new(),
            run_ms: start.elapsed().as_secs_f64() * 1e3,
        },
        trajectory: None,
    };
    let (data, truth) = match scene {
        Ok(s) => s,
        Err(msg) => return failed(msg.clone(), start),
    };
    let pcfg = cfg.pipeline_config(variant, seed);
    let out = match run_window_pipeline(&data.frames, data.intrinsics, data.baseline, &data.gravity, &pcfg) {
        Ok(o) => o,
        Err(e) => return failed(e.to_string(), start),
    };
    let ate = match ate_rmse(&out.trajectory, &truth.trajectory) {
        Ok(a) => a,
        Err(e) => return failed(e.to_string(), start),
    };
    let (solver_status, iterations, cost_trace) = match &out.full_solve {
        Some(r) => (Some(r.status), r.iterations, r.cost_trace.clone()),
        None => (None, 0, Vec::new()),
    };
    let status = if solver_status == Some(SolveStatus::Diverged) || !ate.is_finite() {
        RunStatus::Diverged
    } else {
        RunStatus::Completed
    };
    let refreshes = out
        .refreshes
        .iter()
        .map(|r| RefreshSummary {
            frame_index: r.frame_index,
            applied_at: r.applied_at,
            trials: r.trials,
            planes: r.planes.iter().map(PlaneRecord::from).collect(),
            detect_ms: r.elapsed.as_secs_f64() * 1e3,
        })
        .collect();
    JobOutput {
        run: SeedRun {
            seed,
            status,
            ate_rmse: Some(ate),
            error: None,
            solver_status,
            iterations,
            cost_trace,
            refreshes,
            run_ms: start.elapsed().as_secs_f64() * 1e3,
        },
        trajectory: Some(out.trajectory),
    }
}

/// Runs every (variant, seed) pair and, when `output_dir` is set, writes
/// trajectories, per-variant reports and the summary tables there.
///
/// Individual failures are recorded in the report rather than returned.
/// `scene_base` resolves a relative scene path.
pub fn run_experiment(cfg: &ExperimentConfig, scene_base: Option<&Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let base = cfg.scene.load(scene_base)?;
    base.validate()?;
    let scenes: Vec<Result<(Dataset, GroundTruth), String>> = cfg
        .seeds
        .par_iter()
        .map(|&s| generate(&base.clone().with_seed(s)).map_err(|e| e.to_string()))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.variants.len())
        .flat_map(|v| (0..cfg.seeds.len()).map(move |s| (v, s)))
        .collect();
    let outputs: Vec<JobOutput> = jobs
        .par_iter()
        .map(|&(v, s)| run_one(cfg, cfg.variants[v], cfg.seeds[s], &scenes[s]))
        .collect();

    let mut outputs = outputs.into_iter();
    let mut runs = Vec::new();
    let mut trajectories = Vec::new();
    for &variant in &cfg.variants {
        let mut seeds = Vec::new();
        for &seed in &cfg.seeds {
            let job = outputs.next().expect("one output per job");
            trajectories.push((variant, seed, job.trajectory));
            seeds.push(job.run);
        }
        runs.push(RunReport::new(variant, seeds));
    }
    let report = ExperimentReport { runs };

    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, cfg, &report, &trajectories, &scenes)?;
    }
    Ok(report)
}

type TrajectoryEntry = (Variant, u64, Option<Trajectory>);

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &ExperimentReport,
    trajectories: &[TrajectoryEntry],
    scenes: &[Result<(Dataset, GroundTruth), String>],
) -> Result<()> {
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mkdir(dir)?;
    write_json(&dir.join("config.json"), cfg)?;
    let gt_dir = dir.join("groundtruth");
    mkdir(&gt_dir)?;
    for (seed, scene) in cfg.seeds.iter().zip(scenes) {
        if let Ok((_, truth)) = scene {
            write_trajectory(&gt_dir.join(format!("seed_{seed}.txt")), &truth.trajectory)?;
        }
    }
    for run in &report.runs {
        let vdir = dir.join(run.variant.slug());
        mkdir(&vdir)?;
        write_json(&vdir.join("report.json"), run)?;
    }
    for (variant, seed, traj) in trajectories {
        if let Some(t) = traj {
            write_trajectory(&dir.join(variant.slug()).join(format!("seed_{seed}.txt")), t)?;
        }
    }
    write_summary_csv(&dir.join("summary.csv"), &report.rows())?;
    write_json(&dir.join("summary.json"), &report.summary())
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows from a `summary.csv`, a `summary.json` or a per-variant `report.json`.
pub fn load_rows(path: &Path) -> Result<Vec<SummaryRow>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
        return r
            .deserialize()
            .collect::<std::result::Result<Vec<SummaryRow>, _>>()
            .map_err(|e| Error::format(path, e));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    let parsed = if value.get("rows").is_some() {
        serde_json::from_value::<Summary>(value).map(|s| s.rows)
    } else if value.get("variant").is_some() {
        serde_json::from_value::<RunReport>(value).map(|r| r.rows())
    } else {
        serde_json::from_value::<Vec<SummaryRow>>(value)
    };
    parsed.map_err(|e| Error::format(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDelta {
    pub seed: u64,
    pub ate_a: f64,
    pub ate_b: f64,
    /// `ate_a - ate_b`; negative when `a` is better.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub pairs: Vec<PairedDelta>,
    /// Seeds where `a` has the strictly lower ATE.
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub median_delta: Option<f64>,
    pub median_a: Option<f64>,
    pub median_b: Option<f64>,
    /// Seeds skipped because either side did not complete.
    pub skipped: Vec<u64>,
}

/// Paired per-seed comparison of two runs over the same seed set.
pub fn compare_rows(a: &[SummaryRow], b: &[SummaryRow]) -> Result<Comparison> {
    let seeds_a: BTreeSet<u64> = a.iter().map(|r| r.seed).collect();
    let seeds_b: BTreeSet<u64> = b.iter().map(|r| r.seed).collect();
    if seeds_a.len() != a.len() || seeds_b.len() != b.len() {
        return Err(Error::InvalidInput("a seed appears twice in one report".into()));
    }
    if seeds_a != seeds_b || seeds_a.is_empty() {
        return Err(Error::SeedMismatch);
    }
    let ok = |r: &SummaryRow| match (r.status, r.ate_rmse) {
        (RunStatus::Completed, Some(v)) => Some(v),
        _ => None,
    };
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for ra in a {
        let rb = b.iter().find(|r| r.seed == ra.seed).expect("same seed sets");
        match (ok(ra), ok(rb)) {
            (Some(x), Some(y)) => pairs.push(PairedDelta {
                seed: ra.seed,
                ate_a: x,
                ate_b: y,
                delta: x - y,
            }),
            _ => skipped.push(ra.seed),
        }
    }
    Ok(Comparison {
        wins: pairs.iter().filter(|p| p.ate_a < p.ate_b).count(),
        losses: pairs.iter().filter(|p| p.ate_a > p.ate_b).count(),
        ties: pairs.iter().filter(|p| p.ate_a == p.ate_b).count(),
        median_delta: median(pairs.iter().map(|p| p.delta).collect()),
        median_a: median(pairs.iter().map(|p| p.ate_a).collect()),
        median_b: median(pairs.iter().map(|p| p.ate_b).collect()),
        pairs,
        skipped,
    })
}

pub fn compare_reports(a: &RunReport, b: &RunReport) -> Result<Comparison> {
    compare_rows(&a.rows(), &b.rows())
}
