use nalgebra::Vector3;

use planeba::depth::{compute_normal_map, DEFAULT_NORMAL_SHIFT};
use planeba::sim::{clean_depth, generate, NoiseModel, SceneSpec, UncertaintyMode};

fn spec(seed: u64, frames: usize) -> SceneSpec {
    let mut s = SceneSpec::default_room().with_seed(seed);
    s.trajectory.frames = frames;
    s
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Mean absolute relative depth error per decile of the emitted uncertainty.
fn error_by_decile(mode: UncertaintyMode) -> Vec<f64> {
    let mut s = spec(1, 4);
    s.noise.uncertainty_mode = mode;
    let (data, truth) = generate(&s).unwrap();
    let mut pairs = Vec::new();
    for (i, f) in data.frames.iter().enumerate() {
        let clean = clean_depth(&s, &truth, i).unwrap();
        for y in 0..f.depth.height() {
            for x in 0..f.depth.width() {
                let (d, c) = (f.depth.depth.get(x, y), clean.get(x, y));
                if d > 0.0 && c > 0.0 && d.is_finite() && c.is_finite() {
                    pairs.push((f.depth.uncertainty.get(x, y), (d / c - 1.0).abs()));
                }
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
        .chunks(pairs.len().div_ceil(10))
        .map(|c| c.iter().map(|p| p.1).sum::<f64>() / c.len() as f64)
        .collect()
}

#[test]
fn uncertainty_ranks_depth_error() {
    let deciles = error_by_decile(UncertaintyMode::Correlated);
    let order: Vec<f64> = (0..deciles.len()).map(|i| i as f64).collect();
    let rho = spearman(&order, &deciles);
    assert!(rho > 0.9, "rho {rho}, deciles {deciles:?}");
    assert!(deciles[9] > 3.0 * deciles[0], "{deciles:?}");
}

#[test]
fn uncorrelated_uncertainty_carries_no_signal() {
    let deciles = error_by_decile(UncertaintyMode::Uncorrelated);
    let (lo, hi) = (deciles[0], deciles[9]);
    assert!(hi < 1.5 * lo && lo < 1.5 * hi, "{deciles:?}");
}

#[test]
fn floor_normals_survive_smooth_depth_noise() {
    let mut angles = Vec::new();
    for seed in 0..3 {
        let mut s = spec(seed, 2);
        // 1% depth error varying over half the image width. At fx = 250 a
        // 4-pixel stencil spans only a few centimetres, so pixel-scale noise
        // of that size would tilt the normals by tens of degrees.
        s.noise = NoiseModel { depth_sigma: 0.01, depth_cell: 160.0, ..NoiseModel::noiseless() };
        let (data, truth) = generate(&s).unwrap();
        let f = &data.frames[0];
        assert_eq!(DEFAULT_NORMAL_SHIFT, 4);
        let normals = compute_normal_map(&f.depth, DEFAULT_NORMAL_SHIFT);
        let clean = clean_depth(&s, &truth, 0).unwrap();
        let k = &f.depth.intrinsics;
        let pose = truth.trajectory[0].1;
        let on_floor = |x: usize, y: usize| {
            let c = clean.get(x, y);
            let pc = Vector3::new((x as f64 - k.cx) / k.fx * c, (y as f64 - k.cy) / k.fy * c, c);
            c > 0.0 && c.is_finite() && pose.transform_point(&pc).z.abs() < 1e-6
        };
        let d = DEFAULT_NORMAL_SHIFT;
        for y in d..f.depth.height() - d {
            for x in d..f.depth.width() - d {
                // the whole stencil must see the floor, not a wall or clutter
                if ![(x, y), (x - d, y), (x + d, y), (x, y - d), (x, y + d)].iter().all(|&(u, v)| on_floor(u, v)) {
                    continue;
                }
                if let Some(n) = normals.get(x, y) {
                    angles.push(n.z.abs().min(1.0).acos().to_degrees());
                }
            }
        }
    }
    angles.sort_by(f64::total_cmp);
    assert!(angles.len() > 10_000, "only {} floor normals", angles.len());
    let p95 = angles[angles.len() * 95 / 100];
    assert!(p95 < 5.0, "95th percentile floor normal error {p95} deg");
}

#[test]
fn depth_bias_scales_every_pixel() {
    let mut s = spec(2, 2);
    s.noise = NoiseModel { depth_scale: 0.5, ..NoiseModel::noiseless() };
    let (data, truth) = generate(&s).unwrap();
    let clean = clean_depth(&s, &truth, 1).unwrap();
    let f = &data.frames[1].depth;
    let mut n = 0;
    for y in 0..f.height() {
        for x in 0..f.width() {
            let (d, c) = (f.depth.get(x, y), clean.get(x, y));
            if c > 0.0 && c.is_finite() {
                assert!((d / c - 0.5).abs() < 1e-12, "pixel ({x}, {y}): {d} vs {c}");
                n += 1;
            }
        }
    }
    assert!(n > 10_000);
}

#[test]
fn generation_is_reproducible() {
    let (a, ta) = generate(&spec(9, 3)).unwrap();
    let (b, tb) = generate(&spec(9, 3)).unwrap();
    assert_eq!(ta.trajectory, tb.trajectory);
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        assert_eq!(fa.observations, fb.observations);
        assert_eq!(fa.depth.depth.as_slice(), fb.depth.depth.as_slice());
    }
    let (c, _) = generate(&spec(10, 3)).unwrap();
    assert_ne!(a.frames[0].observations, c.frames[0].observations);
}
