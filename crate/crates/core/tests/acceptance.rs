//! Acceptance criteria A1–A10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use world4d::flowops::deform;
use world4d::io::{
    flow_file, pointmap_file, read_sequence, to_storage_precision, write_sequence, write_tensor, IoError, Tensor, TensorData,
    MANIFEST,
};
use world4d::losses::gradcheck::{gradcheck, LossId};
use world4d::losses::{motion_terms, patch_depth_loss, LossWeights};
use world4d::metrics::{evaluate_sequence, solve_scale_shift, EvalOptions, MetricsReport};
use world4d::normalize::canonical_normalize;
use world4d::pipeline::{preprocess, to_world, PreprocessOptions};
use world4d::synth::{generate, perturb, NoiseSpec, SceneConfig, SyntheticScene};
use world4d::types::{CameraIntrinsics, CameraPose, FrameTag, NormMode, NormParams, PointMap, SceneFlow, SequenceSample};
use world4d::Vec3;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn scenes() -> Vec<SyntheticScene> {
    (0..20u64)
        .map(|seed| generate(&SceneConfig { seed, ..SceneConfig::default() }).expect("scene generation"))
        .collect()
}

fn max_abs(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs().max()).fold(0.0, f64::max)
}

fn a1_closure(scenes: &[SyntheticScene], elapsed_gen: f64) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (seed, s) in scenes.iter().enumerate() {
        let out = preprocess(&s.gt_camera, PreprocessOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        let gt = &s.gt_world;
        for (p, g) in out.point_maps.iter().zip(&gt.point_maps) {
            ensure!(p.mask == g.mask, "seed {seed}: point mask differs");
            ensure!(p.frame == FrameTag::WorldNormalized, "seed {seed}: tag {}", p.frame);
            worst = worst.max(max_abs(&p.data, &g.data));
        }
        for (p, g) in out.flows.iter().zip(&gt.flows) {
            ensure!(p.mask == g.mask, "seed {seed}: flow mask differs");
            worst = worst.max(max_abs(&p.data, &g.data));
        }
        for (p, g) in out.poses.iter().zip(&gt.poses) {
            worst = worst.max((p.rotation - g.rotation).abs().max());
            worst = worst.max((p.translation - g.translation).abs().max());
        }
        let (pn, gn) = (out.norm.unwrap(), gt.norm.unwrap());
        worst = worst.max((pn.mu - gn.mu).abs().max()).max((pn.scale - gn.scale).abs() / gn.scale);
    }
    let secs = elapsed_gen + start.elapsed().as_secs_f64();
    ensure!(worst <= 1e-9, "max abs error {worst:.3e} > 1e-9");
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("20 scenes, max abs error {worst:.3e}, {secs:.2} s"))
}

fn a2_static_flow(scenes: &[SyntheticScene]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for (seed, s) in scenes.iter().enumerate() {
        // without the deformability mask the pipeline must produce zero flow by itself
        let raw = SequenceSample { deformability: None, ..s.gt_camera.clone() };
        let world = to_world(&raw).map_err(|e| format!("seed {seed}: {e}"))?;
        let dynamic = s.gt_camera.deformability.as_ref().unwrap();
        for (fl, dm) in world.flows.iter().zip(dynamic) {
            for k in 0..fl.len() {
                if fl.mask[k] && !dm[k] {
                    worst = worst.max(fl.data[k].norm());
                    count += 1;
                }
            }
        }
    }
    ensure!(count > 0, "no static pixels");
    ensure!(worst <= 1e-9, "static flow magnitude {worst:.3e} > 1e-9");
    Ok(format!("{count} static pixels, max |V| {worst:.3e}"))
}

fn a3_deform(scenes: &[SyntheticScene]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for (seed, s) in scenes.iter().enumerate() {
        let out = preprocess(&s.gt_camera, PreprocessOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        let dynamic = out.deformability.as_ref().unwrap();
        for i in 0..out.flows.len() {
            let moved = deform(&out.point_maps[i], &out.flows[i]).map_err(|e| e.to_string())?;
            for k in 0..moved.len() {
                if dynamic[i][k] {
                    ensure!(moved.mask[k], "seed {seed}: mover pixel {k} lost");
                    worst = worst.max((moved.data[k] - s.next_positions[i].data[k]).abs().max());
                    count += 1;
                }
            }
        }
    }
    ensure!(count > 0, "no mover pixels");
    ensure!(worst <= 1e-9, "max deviation {worst:.3e} > 1e-9");
    Ok(format!("{count} mover pixels, max deviation {worst:.3e}"))
}

fn transformed(seq: &SequenceSample, k: f64, shift: Vec3) -> SequenceSample {
    let mut out = seq.clone();
    for pm in &mut out.point_maps {
        for (p, &m) in pm.data.iter_mut().zip(&pm.mask) {
            if m {
                *p = *p * k + shift;
            }
        }
    }
    for fl in &mut out.flows {
        fl.data.iter_mut().for_each(|v| *v *= k);
    }
    for pose in &mut out.poses {
        pose.translation = pose.translation * k + shift;
    }
    out
}

fn a4_normalization(scenes: &[SyntheticScene]) -> Outcome {
    let (mut shift_diff, mut scale_diff, mut unexplained): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (mut worst_centroid, mut worst_dist): (f64, f64) = (0.0, 0.0);
    for s in scenes.iter().take(5) {
        let (reference, params) = canonical_normalize(&s.gt_world_metric).map_err(|e| e.to_string())?;
        let mean_dist = params.scale - world4d::EPSILON;
        for k in [0.01, 1.0, 100.0] {
            // x̂_k = x̂_1 · (m + ε) / (k m + ε) · k, the effect of the additive ε alone
            let ratio = k * params.scale / (k * mean_dist + world4d::EPSILON);
            for shift in [Vec3::zeros(), Vec3::new(1e6, 0.0, 0.0), Vec3::new(-1e6, 0.0, 0.0)] {
                let input = transformed(&s.gt_world_metric, k, shift);
                let (out, _) = canonical_normalize(&input).map_err(|e| e.to_string())?;
                let mut diff: f64 = 0.0;
                for (a, b) in out.point_maps.iter().zip(&reference.point_maps) {
                    diff = diff.max(max_abs(&a.data, &b.data));
                    let predicted: Vec<Vec3> = b.data.iter().map(|x| x * ratio).collect();
                    unexplained = unexplained.max(max_abs(&a.data, &predicted));
                }
                for (a, b) in out.flows.iter().zip(&reference.flows) {
                    diff = diff.max(max_abs(&a.data, &b.data));
                    let predicted: Vec<Vec3> = b.data.iter().map(|x| x * ratio).collect();
                    unexplained = unexplained.max(max_abs(&a.data, &predicted));
                }
                if k == 1.0 {
                    shift_diff = shift_diff.max(diff);
                } else {
                    scale_diff = scale_diff.max(diff);
                }
                let pts: Vec<Vec3> = out.valid_points().copied().collect();
                let n = pts.len() as f64;
                let c = pts.iter().sum::<Vec3>() / n;
                worst_centroid = worst_centroid.max(c.abs().max());
                worst_dist = worst_dist.max((pts.iter().map(|p| p.norm()).sum::<f64>() / n - 1.0).abs());
            }
        }
    }
    let detail = format!(
        "translation diff {shift_diff:.3e}, scale diff {scale_diff:.3e} (residual after the additive-epsilon term \
         {unexplained:.3e}), centroid {worst_centroid:.3e}, mean-distance error {worst_dist:.3e}"
    );
    ensure!(shift_diff <= 1e-9, "{detail}");
    ensure!(worst_centroid <= 1e-9, "{detail}");
    ensure!(worst_dist <= 1e-6, "{detail}");
    ensure!(scale_diff <= 1e-9, "{detail}");
    Ok(detail)
}

fn metrics_of(r: &MetricsReport) -> [f64; 4] {
    [r.rel_p, r.delta_p, r.epe, r.apd]
}

fn a5_alignment(scenes: &[SyntheticScene]) -> Outcome {
    let gt = &scenes[0].gt_world;
    let masks: Vec<Vec<bool>> = gt.point_maps.iter().map(|p| p.mask.clone()).collect();
    let mut worst_param: f64 = 0.0;
    let mut worst_metric: f64 = 0.0;
    let noisy = perturb(gt, &NoiseSpec { point_sigma: 0.03, flow_sigma: 0.01, flow_jitter_deg: 5.0, ..Default::default() }, 11);
    let opts = EvalOptions::new(0.25, 0.02);
    let base = evaluate_sequence(&noisy, gt, opts).map_err(|e| e.to_string())?;
    for s in [0.1, 1.0, 7.3] {
        for t in [Vec3::zeros(), Vec3::new(5.0, -3.0, 2.0)] {
            let planted: Vec<PointMap> = transformed(gt, s, t).point_maps;
            let a = solve_scale_shift(&gt.point_maps, &planted, &masks).map_err(|e| e.to_string())?;
            worst_param = worst_param.max((a.scale - s).abs()).max((a.shift - t).abs().max());

            let moved = perturb(&noisy, &NoiseSpec { scale: s, shift: t, ..Default::default() }, 0);
            let r = evaluate_sequence(&moved, gt, opts).map_err(|e| e.to_string())?;
            for (x, y) in metrics_of(&r).iter().zip(metrics_of(&base)) {
                worst_metric = worst_metric.max((x - y).abs());
            }
        }
    }
    ensure!(worst_param <= 1e-9, "planted similarity missed by {worst_param:.3e}");
    ensure!(worst_metric <= 1e-9, "metrics moved by {worst_metric:.3e} under similarity");
    Ok(format!("parameter error {worst_param:.3e}, metric drift {worst_metric:.3e}"))
}

/// Straight-line metric computation used as the reference for A6.
fn oracle_metrics(pred: &SequenceSample, gt: &SequenceSample, tau: f64, gamma: f64) -> [f64; 4] {
    let mut p = Vec::new();
    let mut g = Vec::new();
    for f in 0..gt.point_maps.len() {
        for k in 0..gt.point_maps[f].data.len() {
            if pred.point_maps[f].mask[k] && gt.point_maps[f].mask[k] {
                p.push(pred.point_maps[f].data[k]);
                g.push(gt.point_maps[f].data[k]);
            }
        }
    }
    let n = p.len() as f64;
    let mut pm = Vec3::zeros();
    let mut gm = Vec3::zeros();
    for i in 0..p.len() {
        pm += p[i];
        gm += g[i];
    }
    pm /= n;
    gm /= n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..p.len() {
        num += (p[i] - pm).dot(&(g[i] - gm));
        den += (p[i] - pm).dot(&(p[i] - pm));
    }
    let s = num / den;
    let t = gm - s * pm;

    let mut rel_sum = 0.0;
    let mut rel_n = 0.0;
    let mut inliers = 0.0;
    for i in 0..p.len() {
        if g[i].norm() >= 1e-6 {
            let e = (s * p[i] + t - g[i]).norm() / g[i].norm();
            rel_sum += e;
            rel_n += 1.0;
            if e < tau {
                inliers += 1.0;
            }
        }
    }

    let mut epe_sum = 0.0;
    let mut flow_n = 0.0;
    let mut flow_in = 0.0;
    for f in 0..gt.flows.len() {
        for k in 0..gt.flows[f].data.len() {
            if pred.flows[f].mask[k] && gt.flows[f].mask[k] {
                let e = (s * pred.flows[f].data[k] - gt.flows[f].data[k]).norm();
                epe_sum += e;
                flow_n += 1.0;
                if e < gamma {
                    flow_in += 1.0;
                }
            }
        }
    }
    [100.0 * rel_sum / rel_n, 100.0 * inliers / rel_n, epe_sum / flow_n, 100.0 * flow_in / flow_n]
}

fn a6_oracle(scenes: &[SyntheticScene]) -> Outcome {
    let mut worst: f64 = 0.0;
    let gamma = 0.05;
    for set in 0..10u64 {
        let gt = &scenes[set as usize].gt_world;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + set);
        let spec = NoiseSpec {
            point_sigma: rng.random_range(0.005..0.2),
            flow_sigma: rng.random_range(0.005..0.05),
            flow_jitter_deg: rng.random_range(0.0..30.0),
            scale: rng.random_range(0.2..5.0),
            shift: Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
        };
        let pred = perturb(gt, &spec, set);
        let got = metrics_of(&evaluate_sequence(&pred, gt, EvalOptions::new(0.25, gamma)).map_err(|e| e.to_string())?);
        let want = oracle_metrics(&pred, gt, 0.25, gamma);
        for (name, (a, b)) in ["rel_p", "delta_p", "epe", "apd"].iter().zip(got.iter().zip(want)) {
            let rel = (a - b).abs() / b.abs().max(1e-12);
            ensure!(rel <= 1e-9 || (a - b).abs() == 0.0, "set {set}: {name} {a} vs oracle {b}");
            worst = worst.max(if b == 0.0 { (a - b).abs() } else { rel });
        }
    }
    Ok(format!("10 sets, worst relative deviation {worst:.3e}"))
}

fn a7_gradcheck() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    for id in LossId::ALL {
        let r = gradcheck(id, 100, 0).map_err(|e| e.to_string())?;
        ensure!(r.passed(), "{id}: max relative error {:.3e} >= {:.0e}", r.max_rel_error, r.tolerance);
        lines.push(format!("{id} {:.1e}", r.max_rel_error));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!("{} in {secs:.2} s", lines.join(", ")))
}

fn a8_invariances() -> Outcome {
    let (h, w) = (32, 40);
    let k = CameraIntrinsics { fx: 30.0, fy: 30.0, cx: w as f64 / 2.0, cy: h as f64 / 2.0, width: w, height: h };
    let pose = CameraPose::new(
        nalgebra::Rotation3::from_euler_angles(0.1, -0.2, 0.05).into_inner(),
        Vec3::new(0.3, -0.1, 0.2),
    );
    let depth = |r: usize, c: usize| 4.0 + 0.5 * (0.3 * c as f64).sin() * (0.2 * r as f64).cos();
    let gt = PointMap::from_fn(h, w, FrameTag::WorldNormalized, |r, c| Some(pose.transform_point(&(k.pixel_ray(r, c) * depth(r, c)))));
    let pred = PointMap::from_fn(h, w, FrameTag::WorldNormalized, |r, c| {
        Some(pose.transform_point(&(k.pixel_ray(r, c) * (depth(r, c) + 0.75))))
    });
    let weights = LossWeights::default();
    let bias = patch_depth_loss(&pred, &gt, &pose, &k, &weights.patch_scales).map_err(|e| e.to_string())?.value;
    ensure!(bias.abs() <= 1e-12, "patch depth loss {bias:.3e} under depth bias");

    let ones = SceneFlow { data: vec![Vec3::new(1.0, 0.0, 0.0); h * w], ..SceneFlow::zeros(h, w, FrameTag::WorldNormalized) };
    let zero = SceneFlow::zeros(h, w, FrameTag::WorldNormalized);
    let t = motion_terms(&ones, &zero, &vec![false; h * w], &weights).map_err(|e| e.to_string())?;
    ensure!(t.total.value == 0.01, "motion loss {} != 0.01", t.total.value);
    Ok(format!("patch loss under bias {bias:.3e}, regularizer term {}", t.total.value))
}

fn random_sequence(rng: &mut ChaCha8Rng) -> SequenceSample {
    let (h, w, n) = (rng.random_range(1..9), rng.random_range(1..9), rng.random_range(2..5));
    let value = |rng: &mut ChaCha8Rng| Vec3::from_fn(|_, _| rng.random_range(-1e3..1e3));
    let tag = match rng.random_range(0..3) {
        0 => None,
        1 => Some(FrameTag::World),
        _ => Some(FrameTag::WorldNormalized),
    };
    let pm_tag = |i| tag.unwrap_or(FrameTag::Camera(i));
    let point_maps =
        (0..n).map(|i| PointMap::from_fn(h, w, pm_tag(i), |_, _| rng.random_bool(0.8).then(|| value(rng)))).collect();
    let flows = (0..n - 1)
        .map(|i| SceneFlow::from_fn(h, w, pm_tag(i), |_, _| rng.random_bool(0.7).then(|| value(rng))))
        .collect();
    let poses = (0..n)
        .map(|_| {
            let r = nalgebra::Rotation3::from_euler_angles(rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5), rng.random_range(-3.0..3.0));
            CameraPose::new(r.into_inner(), value(rng))
        })
        .collect();
    let intrinsics = CameraIntrinsics {
        fx: rng.random_range(1.0..100.0),
        fy: rng.random_range(1.0..100.0),
        cx: rng.random_range(0.0..w as f64),
        cy: rng.random_range(0.0..h as f64),
        width: w,
        height: h,
    };
    let mut seq = SequenceSample::new(point_maps, flows, poses, intrinsics).unwrap();
    if rng.random_bool(0.5) {
        seq.deformability = Some((0..n - 1).map(|_| (0..h * w).map(|_| rng.random_bool(0.5)).collect()).collect());
    }
    if tag == Some(FrameTag::WorldNormalized) {
        let mode = if rng.random_bool(0.5) { NormMode::Canonical } else { NormMode::Max };
        seq.norm = Some(NormParams { mu: value(rng), scale: rng.random_range(0.1..10.0), mode });
    }
    to_storage_precision(&seq)
}

fn expect_code(dir: &Path, code: u8, what: &str) -> Result<(), String> {
    match read_sequence(dir) {
        Err(e) if e.code() == code => Ok(()),
        Err(e) => Err(format!("{what}: got code {} ({e})", e.code())),
        Ok(_) => Err(format!("{what}: read succeeded")),
    }
}

fn a9_io() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..100 {
        let seq = random_sequence(&mut rng);
        let dir = tmp.path().join(format!("seq{i}"));
        write_sequence(&seq, &dir).map_err(|e| e.to_string())?;
        let back = read_sequence(&dir).map_err(|e| e.to_string())?;
        ensure!(back == seq, "sequence {i} changed in round trip");
    }

    let fresh = |name: &str| -> Result<std::path::PathBuf, String> {
        let dir = tmp.path().join(name);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        write_sequence(&random_sequence(&mut rng), &dir).map_err(|e| e.to_string())?;
        Ok(dir)
    };
    let edit = |path: &Path, f: &dyn Fn(&mut Vec<u8>)| {
        let mut bytes = fs::read(path).unwrap();
        f(&mut bytes);
        fs::write(path, bytes).unwrap();
    };

    let dir = fresh("magic")?;
    edit(&dir.join(pointmap_file(0)), &|b| b[0] = b'X');
    expect_code(&dir, IoError::BadMagic { path: String::new() }.code(), "bad magic")?;

    let dir = fresh("dtype")?;
    edit(&dir.join(pointmap_file(0)), &|b| b[4] = 9);
    expect_code(&dir, 11, "unsupported dtype")?;

    let dir = fresh("header")?;
    edit(&dir.join(pointmap_file(0)), &|b| b.truncate(10));
    expect_code(&dir, 12, "truncated header")?;

    let dir = fresh("payload")?;
    edit(&dir.join(pointmap_file(0)), &|b| {
        b.pop();
    });
    expect_code(&dir, 13, "truncated payload")?;

    let dir = fresh("dims")?;
    // consistent file whose shape disagrees with the manifest
    let seq = read_sequence(&dir).unwrap();
    let dims = vec![seq.height() + 1, seq.width(), 3];
    let fake = Tensor { data: TensorData::F32(vec![0.0; dims[0] * dims[1] * 3]), dims };
    write_tensor(&dir.join(pointmap_file(0)), &fake).unwrap();
    expect_code(&dir, 14, "dim mismatch")?;

    let dir = fresh("wrongtype")?;
    // a mask with the right shape stored as f32
    let seq = read_sequence(&dir).unwrap();
    let dims = vec![seq.height(), seq.width()];
    let fake = Tensor { data: TensorData::F32(vec![1.0; dims[0] * dims[1]]), dims };
    write_tensor(&dir.join(world4d::io::mask_file(0)), &fake).unwrap();
    expect_code(&dir, 15, "wrong dtype")?;

    let dir = fresh("missing")?;
    fs::remove_file(dir.join(world4d::io::pose_file(0))).unwrap();
    expect_code(&dir, 16, "missing file")?;

    let dir = fresh("flows")?;
    let n = read_sequence(&dir).unwrap().frames();
    fs::copy(dir.join(flow_file(0)), dir.join(flow_file(n - 1))).unwrap();
    expect_code(&dir, 17, "flow count")?;

    let dir = fresh("frames")?;
    fs::copy(dir.join(pointmap_file(0)), dir.join(pointmap_file(n))).unwrap();
    expect_code(&dir, 18, "frame count")?;

    let dir = fresh("manifest")?;
    fs::write(dir.join(MANIFEST), "format = nonsense\n").unwrap();
    expect_code(&dir, 19, "manifest")?;

    Ok("100 bit-identical round trips, 10 corruption codes".into())
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_world4d")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn a10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for run in 0..2 {
        let root = tmp.path().join(format!("run{run}"));
        let p = |s: &str| root.join(s).to_string_lossy().into_owned();
        run_cli(&["synth", "--seed", "42", "--out", &p("scene")])?;
        run_cli(&["preprocess", "--in", &p("scene/gt_camera"), "--out", &p("pred")])?;
        let stdout =
            run_cli(&["eval", "--pred", &p("pred"), "--gt", &p("scene/gt_world"), "--gamma", "0.05", "--report", &p("report.txt")])?;
        let file = fs::read(p("report.txt")).map_err(|e| e.to_string())?;
        ensure!(file == stdout.as_bytes(), "report file differs from stdout");
        reports.push(file);
    }
    ensure!(reports[0] == reports[1], "reports differ between runs");
    Ok(format!("{} identical report bytes", reports[0].len()))
}

fn main() {
    let start = Instant::now();
    let scenes = scenes();
    let gen_secs = start.elapsed().as_secs_f64();

    let results: Vec<(&str, &str, Outcome)> = vec![
        ("A1", "pipeline closure", a1_closure(&scenes, gen_secs)),
        ("A2", "static-background zero flow", a2_static_flow(&scenes)),
        ("A3", "deformed-point consistency", a3_deform(&scenes)),
        ("A4", "normalization invariances", a4_normalization(&scenes)),
        ("A5", "alignment recovery", a5_alignment(&scenes)),
        ("A6", "metric oracle equivalence", a6_oracle(&scenes)),
        ("A7", "gradient checks", a7_gradcheck()),
        ("A8", "loss invariance classes", a8_invariances()),
        ("A9", "i/o round-trip", a9_io()),
        ("A10", "determinism", a10_determinism()),
    ];
    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("{id:<4} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id:<4} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
