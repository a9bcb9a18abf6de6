//! Procedural dynamic scenes with exact ground truth.
//!
//! Scenes are laid out in a local frame, then placed in the world through a
//! random rigid rig transform so that raw camera poses are far from identity.
//! World-frame ground truth is computed directly from the analytic hit
//! points through 4×4 matrix inverses. It never goes through the
//! camera-frame pipeline, so it can serve as an oracle for that pipeline.

mod config;
pub mod scene;

use nalgebra::{Matrix4, Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub use config::{SceneConfig, Trajectory};
pub use scene::{Body, RigidMotion, Shape};

use crate::error::{Error, Result};
use crate::types::{CameraIntrinsics, CameraPose, FrameTag, NormMode, NormParams, PointMap, SceneFlow, SequenceSample};
use crate::{Mat3, Vec3, EPSILON};

const TARGET: [f64; 3] = [0.0, 0.3, 6.0];
const GROUND_Y: f64 = 1.5;

/// Generated sequence in every coordinate system the tests need.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    /// Camera-frame maps and flows, raw poses, deformability.
    pub gt_camera: SequenceSample,
    /// First-camera frame, metric units.
    pub gt_world_metric: SequenceSample,
    /// First-camera frame, canonically normalized.
    pub gt_world: SequenceSample,
    /// `next_positions[i]` holds where each valid pixel of frame `i` is at
    /// frame `i + 1`, in normalized world coordinates.
    pub next_positions: Vec<PointMap>,
    pub bodies: Vec<Body>,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Unit<Vec3> {
    loop {
        let v = Vec3::from_fn(|_, _| StandardNormal.sample(rng));
        if v.norm() > 1e-6 {
            return Unit::new_normalize(v);
        }
    }
}

fn yaw(angle: f64) -> Mat3 {
    Rotation3::from_axis_angle(&Vec3::y_axis(), angle).into_inner()
}

/// Random background and movers for `cfg`.
pub fn layout(cfg: &SceneConfig) -> Vec<Body> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bodies = Vec::new();
    let fixed = |shape| Body { shape, motion: None };
    if cfg.ground_plane {
        bodies.push(fixed(Shape::Plane { point: Vec3::new(0.0, GROUND_Y, 0.0), normal: Vec3::new(0.0, -1.0, 0.0) }));
    }
    if cfg.back_wall {
        bodies.push(fixed(Shape::Cuboid {
            center: Vec3::new(0.0, -1.0, 16.0),
            rotation: Mat3::identity(),
            half: Vec3::new(14.0, 2.5, 0.25),
        }));
    }
    for _ in 0..cfg.background_boxes {
        let half = Vec3::new(uniform(&mut rng, 0.3, 1.0), uniform(&mut rng, 0.3, 1.2), uniform(&mut rng, 0.3, 1.0));
        let center = Vec3::new(uniform(&mut rng, -3.5, 3.5), GROUND_Y - half.y, uniform(&mut rng, 7.0, 12.0));
        bodies.push(fixed(Shape::Cuboid { center, rotation: yaw(uniform(&mut rng, 0.0, std::f64::consts::PI)), half }));
    }
    for _ in 0..cfg.movers {
        let center = Vec3::new(uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -0.6, 0.6), uniform(&mut rng, 3.5, 6.0));
        let shape = if rng.random_bool(0.5) {
            Shape::Sphere { center, radius: uniform(&mut rng, 0.35, 0.7) }
        } else {
            let rotation = Rotation3::from_axis_angle(&random_unit(&mut rng), uniform(&mut rng, 0.0, 3.0)).into_inner();
            let half = Vec3::from_fn(|_, _| uniform(&mut rng, 0.3, 0.6));
            Shape::Cuboid { center, rotation, half }
        };
        let velocity = random_unit(&mut rng).into_inner() * uniform(&mut rng, 0.0, cfg.max_speed);
        let axis = random_unit(&mut rng);
        let spin = cfg.max_spin_deg.to_radians();
        let motion = RigidMotion { velocity, axis, angle: uniform(&mut rng, -spin, spin) };
        bodies.push(Body { shape, motion: Some(motion) });
    }
    bodies
}

/// Camera-to-layout poses along the configured trajectory.
fn trajectory(cfg: &SceneConfig) -> Vec<(Mat3, Vec3)> {
    let target = Vec3::from(TARGET);
    let n = cfg.frames;
    match cfg.trajectory {
        Trajectory::Static => {
            let eye = target + Vec3::new(0.0, -1.0, -7.0);
            vec![(scene::look_at(&eye, &target), eye); n]
        }
        Trajectory::Orbit { radius, step_deg, height } => (0..n)
            .map(|i| {
                let theta = (i as f64 - (n - 1) as f64 / 2.0) * step_deg.to_radians();
                let eye = target + Vec3::new(radius * theta.sin(), -height, -radius * theta.cos());
                (scene::look_at(&eye, &target), eye)
            })
            .collect(),
        Trajectory::Dolly { radius, height, step } => {
            let eye0 = target + Vec3::new(0.0, -height, -radius);
            let rot = scene::look_at(&eye0, &target);
            let forward = rot.column(2).into_owned();
            (0..n).map(|i| (rot, eye0 + forward * (step * i as f64))).collect()
        }
    }
}

/// Rigid transform placing the layout in the world, drawn from its own stream.
fn rig(seed: u64) -> CameraPose {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let pi = std::f64::consts::PI;
    let rot = Rotation3::from_euler_angles(uniform(&mut rng, -pi, pi), uniform(&mut rng, -pi, pi), uniform(&mut rng, -pi, pi));
    let t = Vec3::from_fn(|_, _| uniform(&mut rng, -50.0, 50.0));
    CameraPose::new(rot.into_inner(), t)
}

pub fn intrinsics(cfg: &SceneConfig) -> CameraIntrinsics {
    let f = cfg.focal * cfg.width as f64;
    CameraIntrinsics {
        fx: f,
        fy: f,
        cx: cfg.width as f64 / 2.0,
        cy: cfg.height as f64 / 2.0,
        width: cfg.width,
        height: cfg.height,
    }
}

/// Generates the scene described by `cfg`.
pub fn generate(cfg: &SceneConfig) -> Result<SyntheticScene> {
    cfg.validate()?;
    generate_with(cfg, layout(cfg))
}

/// Renders explicit bodies along the trajectory of `cfg`.
pub fn generate_with(cfg: &SceneConfig, bodies: Vec<Body>) -> Result<SyntheticScene> {
    cfg.validate()?;
    let (h, w, n) = (cfg.height, cfg.width, cfg.frames);
    let k = intrinsics(cfg);
    let cams = trajectory(cfg);

    // per frame and pixel: (body, layout-space hit)
    let mut hits: Vec<Vec<Option<(usize, Vec3)>>> = Vec::with_capacity(n);
    for (i, (rot, eye)) in cams.iter().enumerate() {
        let shapes: Vec<Shape> = bodies.iter().map(|b| b.shape_at(i)).collect();
        let frame: Vec<_> = (0..h * w)
            .map(|p| {
                let dir = rot * k.pixel_ray(p / w, p % w);
                scene::cast(&shapes, eye, &dir).map(|(b, lambda)| (b, eye + dir * lambda))
            })
            .collect();
        if frame.iter().all(Option::is_none) {
            return Err(Error::NoVisibleGeometry(i));
        }
        hits.push(frame);
    }
    let advance = |i: usize, p: usize| hits[i][p].map(|(b, x)| (x, bodies[b].advance(&x, i)));

    // camera frame
    let to_cam = |i: usize, x: &Vec3| cams[i].0.transpose() * (x - cams[i].1);
    let cam_maps: Vec<PointMap> = (0..n)
        .map(|i| PointMap::from_fn(h, w, FrameTag::Camera(i), |r, c| hits[i][r * w + c].map(|(_, x)| to_cam(i, &x))))
        .collect();
    let cam_flows: Vec<SceneFlow> = (0..n - 1)
        .map(|i| SceneFlow::from_fn(h, w, FrameTag::Camera(i), |r, c| {
            advance(i, r * w + c).map(|(x, next)| to_cam(i + 1, &next) - to_cam(i, &x))
        }))
        .collect();
    let deformability: Vec<Vec<bool>> =
        (0..n - 1).map(|i| hits[i].iter().map(|hit| hit.is_some_and(|(b, _)| bodies[b].is_mover())).collect()).collect();

    let g = rig(cfg.seed);
    let raw_poses: Vec<CameraPose> = cams.iter().map(|(rot, eye)| g.compose(&CameraPose::new(*rot, *eye))).collect();

    // world frame, straight from layout coordinates
    let first = raw_poses[0]
        .to_homogeneous()
        .try_inverse()
        .ok_or_else(|| Error::InvalidConfig("singular first camera".into()))?
        * g.to_homogeneous();
    let first_lin = first.fixed_view::<3, 3>(0, 0).into_owned();
    let to_first = |x: &Vec3| (first * x.push(1.0)).xyz();
    let canonical: Vec<CameraPose> = raw_poses
        .iter()
        .map(|p| CameraPose::from_homogeneous(&(raw_poses[0].to_homogeneous().try_inverse().unwrap_or(Matrix4::identity()) * p.to_homogeneous())))
        .collect();

    let world_maps: Vec<PointMap> = (0..n)
        .map(|i| PointMap::from_fn(h, w, FrameTag::World, |r, c| hits[i][r * w + c].map(|(_, x)| to_first(&x))))
        .collect();
    let world_flows: Vec<SceneFlow> = (0..n - 1)
        .map(|i| SceneFlow::from_fn(h, w, FrameTag::World, |r, c| advance(i, r * w + c).map(|(x, next)| first_lin * (next - x))))
        .collect();
    let next_metric: Vec<PointMap> = (0..n - 1)
        .map(|i| PointMap::from_fn(h, w, FrameTag::World, |r, c| advance(i, r * w + c).map(|(_, next)| to_first(&next))))
        .collect();

    // canonical statistics by plain summation
    let valid: Vec<Vec3> =
        world_maps.iter().flat_map(|pm| pm.data.iter().zip(&pm.mask).filter(|(_, &m)| m).map(|(p, _)| *p)).collect();
    let mu = valid.iter().sum::<Vec3>() / valid.len() as f64;
    let scale = valid.iter().map(|p| (p - mu).norm()).sum::<f64>() / valid.len() as f64 + EPSILON;
    let norm = NormParams { mu, scale, mode: NormMode::Canonical };
    let normalize_pts = |pm: &PointMap| PointMap {
        data: pm.data.iter().zip(&pm.mask).map(|(p, &m)| if m { (p - mu) / scale } else { Vec3::zeros() }).collect(),
        frame: FrameTag::WorldNormalized,
        ..pm.clone()
    };

    let gt_world = SequenceSample {
        point_maps: world_maps.iter().map(normalize_pts).collect(),
        flows: world_flows
            .iter()
            .map(|f| SceneFlow { data: f.data.iter().map(|v| v / scale).collect(), frame: FrameTag::WorldNormalized, ..f.clone() })
            .collect(),
        poses: canonical.iter().map(|p| CameraPose::new(p.rotation, (p.translation - mu) / scale)).collect(),
        intrinsics: k,
        deformability: Some(deformability.clone()),
        norm: Some(norm),
    };
    let next_positions = next_metric.iter().map(normalize_pts).collect();
    let gt_world_metric = SequenceSample {
        point_maps: world_maps,
        flows: world_flows,
        poses: canonical,
        intrinsics: k,
        deformability: Some(deformability.clone()),
        norm: None,
    };
    let gt_camera = SequenceSample {
        point_maps: cam_maps,
        flows: cam_flows,
        poses: raw_poses,
        intrinsics: k,
        deformability: Some(deformability),
        norm: None,
    };
    Ok(SyntheticScene { gt_camera, gt_world_metric, gt_world, next_positions, bodies })
}

/// Controlled corruption of a sequence, used to fabricate predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Isotropic Gaussian noise on valid points.
    pub point_sigma: f64,
    /// Isotropic Gaussian noise on valid flow vectors.
    pub flow_sigma: f64,
    /// Flow vectors are rotated about a random axis by an angle uniform in `±flow_jitter_deg`.
    pub flow_jitter_deg: f64,
    /// Global similarity `x ↦ scale · x + shift`, applied after the noise.
    pub scale: f64,
    pub shift: Vec3,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { point_sigma: 0.0, flow_sigma: 0.0, flow_jitter_deg: 0.0, scale: 1.0, shift: Vec3::zeros() }
    }
}

/// Applies `spec` to the valid entries of `seq`. Flows get the similarity
/// scale only; pose translations get the full similarity.
pub fn perturb(seq: &SequenceSample, spec: &NoiseSpec, seed: u64) -> SequenceSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = seq.clone();
    let gauss = |rng: &mut ChaCha8Rng, sigma: f64| {
        if sigma > 0.0 {
            let d = Normal::new(0.0, sigma).expect("finite sigma");
            Vec3::from_fn(|_, _| d.sample(rng))
        } else {
            Vec3::zeros()
        }
    };
    for pm in &mut out.point_maps {
        for (p, &m) in pm.data.iter_mut().zip(&pm.mask) {
            if m {
                *p = (*p + gauss(&mut rng, spec.point_sigma)) * spec.scale + spec.shift;
            }
        }
    }
    let jitter = spec.flow_jitter_deg.to_radians();
    for fl in &mut out.flows {
        for (v, &m) in fl.data.iter_mut().zip(&fl.mask) {
            if !m {
                continue;
            }
            if jitter > 0.0 {
                let axis = random_unit(&mut rng);
                *v = Rotation3::from_axis_angle(&axis, uniform(&mut rng, -jitter, jitter)) * *v;
            }
            *v = (*v + gauss(&mut rng, spec.flow_sigma)) * spec.scale;
        }
    }
    for pose in &mut out.poses {
        pose.translation = pose.translation * spec.scale + spec.shift;
    }
    out
}
