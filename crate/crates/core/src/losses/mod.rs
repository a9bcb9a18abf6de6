//! Geometry and motion training objectives with analytic gradients.
//!
//! Every loss returns its scalar value together with `∂value/∂prediction`,
//! laid out like the prediction (one 3-vector per pixel). Gradients are
//! checked against central finite differences in [`gradcheck`].

pub mod gradcheck;

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geomath::{project_depth, stencils, DepthMap};
use crate::types::{CameraIntrinsics, CameraPose, GridShape, PointMap, SceneFlow};
use crate::Vec3;

pub use gradcheck::{gradcheck, GradcheckReport, LossId};

/// A loss value and its gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: Vec<Vec3>,
}

impl LossResult {
    fn zeros(n: usize) -> Self {
        Self { value: 0.0, grad: vec![Vec3::zeros(); n] }
    }

    /// `self += weight * other`.
    fn accumulate(&mut self, weight: f64, other: &LossResult) {
        self.value += weight * other.value;
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += weight * o;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    pub lambda_point: f64,
    pub lambda_l1_depth: f64,
    pub lambda_patch_depth: f64,
    pub lambda_normal: f64,
    pub lambda_reg: f64,
    /// Patch edge lengths, in pixels.
    pub patch_scales: Vec<usize>,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_point: 1.0,
            lambda_l1_depth: 1.0,
            lambda_patch_depth: 1.0,
            lambda_normal: 0.2,
            lambda_reg: 0.01,
            patch_scales: vec![4, 16, 64],
        }
    }
}

impl FromStr for LossWeights {
    type Err = Error;

    /// Parses `key = value` lines; unspecified keys keep their defaults.
    fn from_str(text: &str) -> Result<Self> {
        let mut w = LossWeights::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || v.parse::<f64>().map_err(|_| Error::InvalidConfig(format!("bad number `{v}` for `{k}`")));
            match k {
                "lambda_point" => w.lambda_point = num()?,
                "lambda_l1_depth" => w.lambda_l1_depth = num()?,
                "lambda_patch_depth" => w.lambda_patch_depth = num()?,
                "lambda_normal" => w.lambda_normal = num()?,
                "lambda_reg" => w.lambda_reg = num()?,
                "patch_scales" => {
                    w.patch_scales = v
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse().map_err(|_| Error::InvalidConfig(format!("bad patch scale `{s}`"))))
                        .collect::<Result<_>>()?;
                }
                _ => return Err(Error::InvalidConfig(format!("unknown weight `{k}`"))),
            }
        }
        w.validate()?;
        Ok(w)
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_point, self.lambda_l1_depth, self.lambda_patch_depth, self.lambda_normal, self.lambda_reg];
        if all.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidConfig("loss weights must be finite and non-negative".into()));
        }
        if self.patch_scales.contains(&0) {
            return Err(Error::InvalidConfig("patch scales must be positive".into()));
        }
        Ok(())
    }
}

fn check_pair<A: GridShape, B: GridShape>(a: &A, b: &B, mask: Option<&[bool]>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("prediction {:?} vs target {:?}", a.shape(), b.shape())));
    }
    if let Some(m) = mask {
        let (h, w) = a.shape();
        if m.len() != h * w {
            return Err(Error::ShapeMismatch(format!("mask has {} entries, expected {}", m.len(), h * w)));
        }
    }
    Ok(())
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean squared point error over the valid pixels. An empty mask gives zero.
pub fn point_loss(pred: &PointMap, gt: &PointMap, mask: &[bool]) -> Result<LossResult> {
    check_pair(pred, gt, Some(mask))?;
    let n = mask.iter().filter(|&&m| m).count();
    let mut out = LossResult::zeros(pred.len());
    if n == 0 {
        return Ok(out);
    }
    let inv = 1.0 / n as f64;
    for k in 0..pred.len() {
        if mask[k] {
            let d = pred.data[k] - gt.data[k];
            out.value += d.norm_squared();
            out.grad[k] = 2.0 * inv * d;
        }
    }
    out.value *= inv;
    Ok(out)
}

/// Both depth maps plus their joint validity.
struct DepthPair {
    pred: DepthMap,
    gt: DepthMap,
    joint: Vec<bool>,
    count: usize,
    /// `∂depth/∂point`: the camera's viewing axis in world coordinates.
    axis: Vec3,
}

fn depth_pair(pred: &PointMap, gt: &PointMap, pose: &CameraPose, intrinsics: &CameraIntrinsics) -> Result<DepthPair> {
    check_pair(pred, gt, None)?;
    let pred_d = project_depth(pred, pose, intrinsics)?;
    let gt_d = project_depth(gt, pose, intrinsics)?;
    let joint: Vec<bool> = pred_d.mask.iter().zip(&gt_d.mask).map(|(&a, &b)| a && b).collect();
    let count = joint.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::NoValidPixels("depth loss has no jointly valid pixels"));
    }
    Ok(DepthPair { pred: pred_d, gt: gt_d, joint, count, axis: pose.rotation.column(2).into_owned() })
}

/// Mean absolute depth error over pixels valid in both projected depth maps.
pub fn depth_l1_loss(
    pred: &PointMap,
    gt: &PointMap,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
) -> Result<LossResult> {
    let dp = depth_pair(pred, gt, pose, intrinsics)?;
    let inv = 1.0 / dp.count as f64;
    let mut out = LossResult::zeros(pred.len());
    for k in 0..pred.len() {
        if dp.joint[k] {
            let e = dp.pred.data[k] - dp.gt.data[k];
            out.value += e.abs();
            out.grad[k] = sign(e) * inv * dp.axis;
        }
    }
    out.value *= inv;
    Ok(out)
}

/// Multi-scale L1 loss on patch-mean-removed depth.
///
/// For every scale `s` the image is tiled by `s × s` patches (trailing
/// patches keep their smaller size). Inside a patch the masked mean of the
/// depth error is removed, so any per-patch depth shift costs nothing.
/// Each scale contributes the mean absolute residual over all valid pixels.
pub fn patch_depth_loss(
    pred: &PointMap,
    gt: &PointMap,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    scales: &[usize],
) -> Result<LossResult> {
    if scales.contains(&0) {
        return Err(Error::InvalidConfig("patch scales must be positive".into()));
    }
    let dp = depth_pair(pred, gt, pose, intrinsics)?;
    let (h, w) = (pred.height, pred.width);
    let inv = 1.0 / dp.count as f64;
    let err: Vec<f64> = (0..pred.len())
        .map(|k| if dp.joint[k] { dp.pred.data[k] - dp.gt.data[k] } else { 0.0 })
        .collect();

    let mut value = 0.0;
    let mut d_depth = vec![0.0; pred.len()];
    let mut members = Vec::new();
    for &s in scales {
        for r0 in (0..h).step_by(s) {
            for c0 in (0..w).step_by(s) {
                members.clear();
                for r in r0..(r0 + s).min(h) {
                    for c in c0..(c0 + s).min(w) {
                        let k = r * w + c;
                        if dp.joint[k] {
                            members.push(k);
                        }
                    }
                }
                if members.is_empty() {
                    continue;
                }
                let n_patch = members.len() as f64;
                let mean = members.iter().map(|&k| err[k]).sum::<f64>() / n_patch;
                let mut g_mean = 0.0;
                for &k in &members {
                    let res = err[k] - mean;
                    value += res.abs() * inv;
                    let g = sign(res) * inv;
                    d_depth[k] += g;
                    g_mean += g;
                }
                // mean-removal Jacobian (I − 11ᵀ/n) is symmetric
                g_mean /= n_patch;
                for &k in &members {
                    d_depth[k] -= g_mean;
                }
            }
        }
    }
    let grad = d_depth.iter().map(|&g| g * dp.axis).collect();
    Ok(LossResult { value, grad })
}

/// Mean `1 − cos` between predicted and target normals over pixels whose
/// stencils are valid in both maps.
pub fn normal_loss(pred: &PointMap, gt: &PointMap, mask: &[bool]) -> Result<LossResult> {
    check_pair(pred, gt, Some(mask))?;
    let (h, w) = (pred.height, pred.width);
    if h < 3 || w < 3 {
        return Err(Error::DegenerateSize { height: h, width: w, min: 3 });
    }
    let sp = stencils(&pred.data, mask, h, w);
    let sg = stencils(&gt.data, mask, h, w);
    let count = sp.iter().zip(&sg).filter(|(a, b)| a.is_some() && b.is_some()).count();
    if count == 0 {
        return Err(Error::NoValidPixels("normal loss has no valid stencils"));
    }
    let inv = 1.0 / count as f64;
    let mut out = LossResult::zeros(pred.len());
    for k in 0..pred.len() {
        let (Some(p), Some(g)) = (&sp[k], &sg[k]) else { continue };
        let len = p.cross.norm();
        let n_pred = p.cross / len;
        let n_gt = g.cross.normalize();
        // 1 − cos written as half the squared chord: exact zero for equal normals
        out.value += 0.5 * (n_pred - n_gt).norm_squared();

        // d/dc of −⟨c/|c|, n_gt⟩ = −(I − n nᵀ) n_gt / |c|
        let g_cross = -(n_gt - n_pred * n_pred.dot(&n_gt)) * (inv / len);
        // cross = ty × tx
        let g_ty = p.tx.cross(&g_cross);
        let g_tx = g_cross.cross(&p.ty);
        out.grad[k + 1] += g_tx;
        out.grad[k - 1] -= g_tx;
        out.grad[k + w] += g_ty;
        out.grad[k - w] -= g_ty;
    }
    out.value *= inv;
    Ok(out)
}

/// Per-term values of [`geometry_loss`], unweighted.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryTerms {
    pub point: f64,
    pub depth_l1: f64,
    pub patch_depth: f64,
    pub normal: f64,
    pub total: LossResult,
}

/// Weighted geometry objective, reporting each term. Terms with zero weight
/// are not evaluated.
pub fn geometry_terms(
    pred: &PointMap,
    gt: &PointMap,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    weights: &LossWeights,
) -> Result<GeometryTerms> {
    weights.validate()?;
    check_pair(pred, gt, None)?;
    let mask: Vec<bool> = pred.mask.iter().zip(&gt.mask).map(|(&a, &b)| a && b).collect();
    let mut total = LossResult::zeros(pred.len());
    let mut terms = [0.0; 4];

    if weights.lambda_point > 0.0 {
        let l = point_loss(pred, gt, &mask)?;
        terms[0] = l.value;
        total.accumulate(weights.lambda_point, &l);
    }
    if weights.lambda_l1_depth > 0.0 {
        let l = depth_l1_loss(pred, gt, pose, intrinsics)?;
        terms[1] = l.value;
        total.accumulate(weights.lambda_l1_depth, &l);
    }
    if weights.lambda_patch_depth > 0.0 {
        let l = patch_depth_loss(pred, gt, pose, intrinsics, &weights.patch_scales)?;
        terms[2] = l.value;
        total.accumulate(weights.lambda_patch_depth, &l);
    }
    if weights.lambda_normal > 0.0 {
        let l = normal_loss(pred, gt, &mask)?;
        terms[3] = l.value;
        total.accumulate(weights.lambda_normal, &l);
    }
    Ok(GeometryTerms { point: terms[0], depth_l1: terms[1], patch_depth: terms[2], normal: terms[3], total })
}

/// Point + depth + normal objective for one frame.
pub fn geometry_loss(
    pred: &PointMap,
    gt: &PointMap,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    weights: &LossWeights,
) -> Result<LossResult> {
    geometry_terms(pred, gt, pose, intrinsics, weights).map(|t| t.total)
}

/// Per-term values of [`motion_loss`], unweighted.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTerms {
    pub reconstruction: f64,
    pub regularizer: f64,
    pub total: LossResult,
}

/// Scene-flow MSE on the valid pixels plus a zero-flow penalty on every pixel.
///
/// The regularizer deliberately reaches invalid pixels: unsupervised flow
/// is pulled toward zero. An empty valid set only drops the first term.
pub fn motion_terms(pred: &SceneFlow, gt: &SceneFlow, valid: &[bool], weights: &LossWeights) -> Result<MotionTerms> {
    check_pair(pred, gt, Some(valid))?;
    let mut total = LossResult::zeros(pred.len());
    let n_valid = valid.iter().filter(|&&m| m).count();
    let n_all = pred.len();

    let mut reconstruction = 0.0;
    if n_valid > 0 {
        let inv = 1.0 / n_valid as f64;
        for k in 0..n_all {
            if valid[k] {
                let d = pred.data[k] - gt.data[k];
                reconstruction += d.norm_squared();
                total.grad[k] = 2.0 * inv * d;
            }
        }
        reconstruction *= inv;
    }

    let mut regularizer = 0.0;
    if n_all > 0 {
        let inv = 1.0 / n_all as f64;
        for (v, g) in pred.data.iter().zip(total.grad.iter_mut()) {
            regularizer += v.norm_squared();
            *g += weights.lambda_reg * 2.0 * inv * v;
        }
        regularizer *= inv;
    }
    total.value = reconstruction + weights.lambda_reg * regularizer;
    Ok(MotionTerms { reconstruction, regularizer, total })
}

pub fn motion_loss(pred: &SceneFlow, gt: &SceneFlow, valid: &[bool], weights: &LossWeights) -> Result<LossResult> {
    motion_terms(pred, gt, valid, weights).map(|t| t.total)
}
