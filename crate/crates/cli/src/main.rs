use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use planeba::depth::{compute_normal_map, read_depth_frame, ScaleCorrection, DEFAULT_NORMAL_SHIFT};
use planeba::experiment::{
    compare_rows, load_rows, run_experiment, ExperimentConfig, SceneSource, SummaryRow, Variant,
};
use planeba::geometry::GravityVector;
use planeba::plane::{detect_all_planes, sample_depth_points, write_inlier_mask_pgm, write_planes_json, RansacConfig};
use planeba::sim::{generate, write_dataset, NoiseModel, SceneSpec, UncertaintyMode};

#[derive(Parser)]
#[command(name = "planeba", version, about = "Plane-regularized bundle adjustment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Correlated,
    Uncorrelated,
    Zero,
}

impl From<ModeArg> for UncertaintyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Correlated => UncertaintyMode::Correlated,
            ModeArg::Uncorrelated => UncertaintyMode::Uncorrelated,
            ModeArg::Zero => UncertaintyMode::Zero,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scene and write the dataset with its ground truth.
    Generate {
        /// Scene spec JSON; the default room when omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, value_enum)]
        uncertainty_mode: Option<ModeArg>,
        /// Drop every noise source.
        #[arg(long)]
        noiseless: bool,
    },
    /// Run the ablation variants over the configured seeds.
    Run {
        /// Experiment config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Comma-separated variants: baseline, +P, +U, +U+P.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, value_enum)]
        uncertainty_mode: Option<ModeArg>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        ransac_w: Option<f64>,
        #[arg(long)]
        ransac_p: Option<f64>,
        #[arg(long)]
        refresh_period: Option<usize>,
        #[arg(long)]
        huber_delta: Option<f64>,
    },
    /// Paired per-seed comparison of two result files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Variant to take from `a` when it holds several.
        #[arg(long)]
        variant_a: Option<String>,
        #[arg(long)]
        variant_b: Option<String>,
        /// Print the comparison as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Detect planes in one depth frame of a generated dataset.
    DetectPlanes {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 2)]
        stride: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Generate { scene, seed, out, frames, uncertainty_mode, noiseless } => {
            let mut spec = match scene {
                Some(p) => SceneSource::Path(p).load(None)?,
                None => SceneSpec::default_room(),
            }
            .with_seed(seed);
            if noiseless {
                spec.noise = NoiseModel::noiseless();
            }
            if let Some(m) = uncertainty_mode {
                spec.noise.uncertainty_mode = m.into();
            }
            if let Some(n) = frames {
                spec.trajectory.frames = n;
            }
            let (data, truth) = generate(&spec)?;
            write_dataset(&out, &spec, &data, &truth)?;
            println!("wrote {} frames to {}", data.frames.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            out,
            seeds,
            variants,
            scene,
            uncertainty_mode,
            alpha,
            beta,
            theta,
            ransac_w,
            ransac_p,
            refresh_period,
            huber_delta,
        } => {
            let (mut cfg, mut base) = match &config {
                Some(p) => (ExperimentConfig::load(p)?, p.parent().map(Path::to_path_buf)),
                None => (ExperimentConfig::default(), None),
            };
            if let Some(s) = scene {
                cfg.scene = SceneSource::Path(s);
                base = None;
            }
            if let Some(m) = uncertainty_mode {
                let mut spec = cfg.scene.load(base.as_deref())?;
                spec.noise.uncertainty_mode = m.into();
                cfg.scene = SceneSource::Inline(Box::new(spec));
            }
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(v) = variants {
                cfg.variants = v.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            }
            macro_rules! set {
                ($($f:ident),*) => { $(if let Some(v) = $f { cfg.$f = v; })* };
            }
            set!(alpha, beta, theta, ransac_w, ransac_p, refresh_period, huber_delta);
            if out.is_some() {
                cfg.output_dir = out;
            }
            let report = run_experiment(&cfg, base.as_deref())?;
            println!("{:<10} {:>12} {:>10} {:>7}", "variant", "median_ate", "completed", "failed");
            for r in &report.runs {
                let m = r.median_ate.map_or("-".to_string(), |v| format!("{v:.6}"));
                println!("{:<10} {:>12} {:>10} {:>7}", r.variant.label(), m, r.completed, r.failed);
                for s in r.seeds.iter().filter(|s| s.error.is_some()) {
                    eprintln!("  {} seed {}: {}", r.variant, s.seed, s.error.as_deref().unwrap_or_default());
                }
            }
            if let Some(dir) = &cfg.output_dir {
                println!("results in {}", dir.display());
            }
            Ok(if report.all_failed() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Compare { a, b, variant_a, variant_b, json } => {
            let ra = select(&a, variant_a.as_deref())?;
            let rb = select(&b, variant_b.as_deref())?;
            let c = compare_rows(&ra, &rb)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&c)?);
            } else {
                println!("{:>6} {:>12} {:>12} {:>13}", "seed", "ate_a", "ate_b", "delta");
                for p in &c.pairs {
                    println!("{:>6} {:>12.6} {:>12.6} {:>+13.6}", p.seed, p.ate_a, p.ate_b, p.delta);
                }
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:+.6}"));
                println!(
                    "wins {} losses {} ties {} median delta {}",
                    c.wins,
                    c.losses,
                    c.ties,
                    fmt(c.median_delta)
                );
                if !c.skipped.is_empty() {
                    println!("skipped seeds {:?}", c.skipped);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::DetectPlanes { dataset, frame, out, samples, stride, seed } => {
            let header = dataset.join("frames").join(format!("frame_{frame:06}.json"));
            let depth = read_depth_frame::<f64>(&header)?;
            let gravity = read_gravity(&dataset.join("gravity.json"))?;
            let normals = compute_normal_map(&depth, DEFAULT_NORMAL_SHIFT);
            let points =
                sample_depth_points(&depth, &normals, &ScaleCorrection::identity(), samples, stride, seed)?;
            let cfg = RansacConfig { seed, ..RansacConfig::default() };
            let set = detect_all_planes(&[], &points, &gravity, &cfg)?;

            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_planes_json(&out.join("planes.json"), &set.planes)?;
            let (w, h) = (depth.width(), depth.height());
            let labels: Vec<Option<usize>> = (0..h)
                .flat_map(|y| (0..w).map(move |x| (x, y)))
                .map(|(x, y)| {
                    let p = depth.world_point(x, y)?;
                    set.planes
                        .iter()
                        .enumerate()
                        .map(|(i, pl)| (i, pl.signed_distance(&p).abs()))
                        .filter(|&(_, d)| d < cfg.theta)
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .map(|(i, _)| i)
                })
                .collect();
            write_inlier_mask_pgm(&out.join("mask.pgm"), w, h, &labels)?;
            for (i, p) in set.planes.iter().enumerate() {
                println!(
                    "plane {i}: {:?} n=({:.4}, {:.4}, {:.4}) d={:.4} weight={:.1}",
                    p.class,
                    p.normal.x,
                    p.normal.y,
                    p.normal.z,
                    p.offset,
                    p.inlier_weight
                );
            }
            println!("{} trials in {:.2} ms", set.total_trials(), set.elapsed().as_secs_f64() * 1e3);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_gravity(path: &Path) -> Result<GravityVector<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let g: [f64; 3] = serde_json::from_value(v["gravity"].clone())
        .with_context(|| format!("{}: expected a \"gravity\" array of 3 numbers", path.display()))?;
    Ok(GravityVector::new(g.into())?)
}

/// Rows of one variant; `variant` is required when the file holds several.
fn select(path: &Path, variant: Option<&str>) -> Result<Vec<SummaryRow>> {
    let rows = load_rows(path)?;
    let chosen: Variant = match variant {
        Some(v) => v.parse()?,
        None => {
            let mut found: Vec<Variant> = rows.iter().map(|r| r.variant).collect();
            found.dedup();
            found.sort();
            found.dedup();
            match found.as_slice() {
                [one] => *one,
                [] => bail!("{} holds no rows", path.display()),
                _ => bail!("{} holds several variants; pick one with --variant-a/--variant-b", path.display()),
            }
        }
    };
    Ok(rows.into_iter().filter(|r| r.variant == chosen).collect())
}
