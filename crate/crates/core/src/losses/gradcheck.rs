//! Central finite-difference checks of the analytic loss gradients.

use std::fmt;
use std::str::FromStr;

use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    depth_l1_loss, geometry_loss, motion_loss, normal_loss, patch_depth_loss, point_loss, LossResult, LossWeights,
};
use crate::error::{Error, Result};
use crate::types::{CameraIntrinsics, CameraPose, FrameTag, PointMap, SceneFlow};
use crate::Vec3;

/// Finite-difference step, for inputs of unit scale.
pub const FD_STEP: f64 = 1e-4;
/// Floor on the relative-error denominator so that vanishing gradient
/// entries are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossId {
    Point,
    DepthL1,
    PatchDepth,
    Normal,
    Geometry,
    Motion,
}

impl LossId {
    pub const ALL: [LossId; 6] =
        [LossId::Point, LossId::DepthL1, LossId::PatchDepth, LossId::Normal, LossId::Geometry, LossId::Motion];

    pub fn name(self) -> &'static str {
        match self {
            LossId::Point => "point",
            LossId::DepthL1 => "depth_l1",
            LossId::PatchDepth => "patch_depth",
            LossId::Normal => "normal",
            LossId::Geometry => "geometry",
            LossId::Motion => "motion",
        }
    }

    /// Maximum accepted relative error.
    pub fn tolerance(self) -> f64 {
        match self {
            LossId::Normal | LossId::Geometry => 1e-4,
            _ => 1e-5,
        }
    }

    /// Piecewise-linear losses, whose kinks a difference stencil can straddle.
    fn piecewise_linear(self) -> bool {
        matches!(self, LossId::DepthL1 | LossId::PatchDepth)
    }
}

impl fmt::Display for LossId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossId::ALL.into_iter().find(|id| id.name() == s).ok_or_else(|| Error::UnknownLoss(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub loss: LossId,
    pub trials: usize,
    /// Coordinates redrawn because the stencil straddled a kink.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Random but well-conditioned inputs for one check.
struct Fixture {
    gt: PointMap,
    pred: PointMap,
    pose: CameraPose,
    intrinsics: CameraIntrinsics,
    gt_flow: SceneFlow,
    pred_flow: SceneFlow,
    flow_valid: Vec<bool>,
}

const HEIGHT: usize = 18;
const WIDTH: usize = 14;

impl Fixture {
    fn new(rng: &mut ChaCha8Rng) -> Fixture {
        let intrinsics =
            CameraIntrinsics { fx: 12.0, fy: 12.0, cx: WIDTH as f64 / 2.0, cy: HEIGHT as f64 / 2.0, width: WIDTH, height: HEIGHT };
        let pose = CameraPose::new(
            Rotation3::from_euler_angles(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))
                .into_inner(),
            Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
        );
        let phase: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
        let mask: Vec<bool> = (0..HEIGHT * WIDTH).map(|_| rng.random_bool(0.9)).collect();
        let gt = PointMap::from_fn(HEIGHT, WIDTH, FrameTag::WorldNormalized, |r, c| {
            let (rf, cf) = (r as f64, c as f64);
            let z = 3.0 + 0.4 * (0.5 * cf + phase[0]).sin() * (0.4 * rf + phase[1]).cos();
            mask[r * WIDTH + c].then(|| pose.transform_point(&(intrinsics.pixel_ray(r, c) * z)))
        });
        // smooth deformation plus noise keeps normals well defined while
        // moving depths far from the L1 kinks
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut pred = gt.clone();
        for r in 0..HEIGHT {
            for c in 0..WIDTH {
                let k = r * WIDTH + c;
                let (rf, cf) = (r as f64, c as f64);
                let bump = 0.3 * (0.3 * rf + phase[2]).sin() * (0.35 * cf + phase[3]).cos();
                let jitter = Vec3::from_fn(|_, _| noise.sample(rng));
                pred.data[k] = gt.data[k] + pose.rotation * Vec3::new(0.05 * bump, -0.05 * bump, bump) + jitter;
                pred.mask[k] = true;
            }
        }
        let unit = Normal::new(0.0, 0.5).unwrap();
        let mut flow = || {
            let mut f = SceneFlow::zeros(HEIGHT, WIDTH, FrameTag::WorldNormalized);
            f.data.iter_mut().for_each(|v| *v = Vec3::from_fn(|_, _| unit.sample(rng)));
            f
        };
        let gt_flow = flow();
        let pred_flow = flow();
        let flow_valid = (0..HEIGHT * WIDTH).map(|_| rng.random_bool(0.7)).collect();
        Fixture { gt, pred, pose, intrinsics, gt_flow, pred_flow, flow_valid }
    }

    fn eval(&self, id: LossId, pred: &[Vec3]) -> Result<LossResult> {
        let weights = LossWeights::default();
        let pm = || PointMap { data: pred.to_vec(), ..self.pred.clone() };
        match id {
            LossId::Point => point_loss(&pm(), &self.gt, &self.gt.mask),
            LossId::DepthL1 => depth_l1_loss(&pm(), &self.gt, &self.pose, &self.intrinsics),
            LossId::PatchDepth => {
                patch_depth_loss(&pm(), &self.gt, &self.pose, &self.intrinsics, &weights.patch_scales)
            }
            LossId::Normal => normal_loss(&pm(), &self.gt, &self.gt.mask),
            LossId::Geometry => geometry_loss(&pm(), &self.gt, &self.pose, &self.intrinsics, &weights),
            LossId::Motion => {
                let f = SceneFlow { data: pred.to_vec(), ..self.pred_flow.clone() };
                motion_loss(&f, &self.gt_flow, &self.flow_valid, &weights)
            }
        }
    }

    fn start(&self, id: LossId) -> &[Vec3] {
        match id {
            LossId::Motion => &self.pred_flow.data,
            _ => &self.pred.data,
        }
    }

    /// Pixels whose gradient the loss defines: supervised ones, or all for motion.
    fn candidates(&self, id: LossId) -> Vec<usize> {
        match id {
            LossId::Motion => (0..HEIGHT * WIDTH).collect(),
            _ => (0..HEIGHT * WIDTH).filter(|&k| self.gt.mask[k]).collect(),
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares analytic gradients with central differences at `trials` random
/// coordinates and reports the worst relative error.
///
/// For the L1 depth losses a coordinate whose forward and backward one-sided
/// slopes disagree sits on a kink, where no derivative exists; it is redrawn
/// and counted in [`GradcheckReport::skipped`].
pub fn gradcheck(id: LossId, trials: usize, seed: u64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fx = Fixture::new(&mut rng);
    let x0 = fx.start(id).to_vec();
    let base = fx.eval(id, &x0)?;
    let candidates = fx.candidates(id);

    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    let mut done = 0;
    // bounded redraws keep the loop finite on pathological inputs
    let max_draws = trials * 20 + 100;
    let mut draws = 0;
    while done < trials && draws < max_draws {
        draws += 1;
        let pixel = candidates[rng.random_range(0..candidates.len())];
        let axis = rng.random_range(0..3);

        let mut x = x0.clone();
        x[pixel][axis] += FD_STEP;
        let plus = fx.eval(id, &x)?.value;
        x[pixel][axis] -= 2.0 * FD_STEP;
        let minus = fx.eval(id, &x)?.value;

        if id.piecewise_linear() {
            let fwd = (plus - base.value) / FD_STEP;
            let bwd = (base.value - minus) / FD_STEP;
            if relative_error(fwd, bwd) > id.tolerance() {
                skipped += 1;
                continue;
            }
        }
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(base.grad[pixel][axis], numeric));
        done += 1;
    }
    if done < trials {
        // every redraw hit a kink; report it as a failure rather than a pass
        worst = f64::INFINITY;
    }
    Ok(GradcheckReport { loss: id, trials, skipped, max_rel_error: worst, tolerance: id.tolerance() })
}
