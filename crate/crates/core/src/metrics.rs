//! World-space evaluation: per-sequence scale/shift alignment followed by
//! relative point error, point inlier ratio, flow end-point error and flow
//! inlier ratio.
//!
//! Percentages are raw numbers in `[0, 100]`. All reductions run in a fixed
//! order so that reports are bit-stable.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::types::{PointMap, SceneFlow, SequenceSample};
use crate::{Vec3, EPSILON};

/// Default inlier threshold on the relative point error.
pub const DEFAULT_TAU: f64 = 0.25;
/// Ground-truth points closer than this to the origin are not scored by the
/// relative metrics.
pub const MIN_GT_NORM: f64 = 1e-6;

/// `x ↦ scale · x + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignParams {
    pub scale: f64,
    pub shift: Vec3,
    /// Set when the least-squares scale was non-positive and got clamped.
    pub degenerate: bool,
}

impl AlignParams {
    pub fn identity() -> Self {
        Self { scale: 1.0, shift: Vec3::zeros(), degenerate: false }
    }

    #[inline]
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * p + self.shift
    }
}

fn check_lengths(a: usize, b: usize, c: usize) -> Result<()> {
    if a != b || a != c {
        return Err(Error::ShapeMismatch(format!("{a} predictions, {b} targets, {c} masks")));
    }
    Ok(())
}

fn check_grid(h: usize, w: usize, oh: usize, ow: usize, mask: usize) -> Result<()> {
    if h != oh || w != ow || mask != h * w {
        return Err(Error::ShapeMismatch(format!("{h}x{w} vs {oh}x{ow} with {mask}-entry mask")));
    }
    Ok(())
}

/// Valid (prediction, target) point pairs pooled over frames.
fn pairs<'a, M: AsRef<[bool]>>(
    pred: &'a [PointMap],
    gt: &'a [PointMap],
    masks: &'a [M],
) -> Result<impl Iterator<Item = (&'a Vec3, &'a Vec3)>> {
    check_lengths(pred.len(), gt.len(), masks.len())?;
    for ((p, g), m) in pred.iter().zip(gt).zip(masks) {
        check_grid(p.height, p.width, g.height, g.width, m.as_ref().len())?;
    }
    Ok(pred.iter().zip(gt).zip(masks).flat_map(|((p, g), m)| {
        p.data.iter().zip(&g.data).zip(m.as_ref()).filter(|(_, &v)| v).map(|(pair, _)| pair)
    }))
}

/// Closed-form least squares for `min Σ ‖s·x̂ + t − x‖²` over all valid
/// points of all frames.
pub fn solve_scale_shift<M: AsRef<[bool]>>(pred: &[PointMap], gt: &[PointMap], masks: &[M]) -> Result<AlignParams> {
    let mut n = 0usize;
    let mut anchor: Option<(Vec3, Vec3)> = None;
    let (mut sum_p, mut sum_g) = (Vec3::zeros(), Vec3::zeros());
    for (p, g) in pairs(pred, gt, masks)? {
        let (ap, ag) = *anchor.get_or_insert((*p, *g));
        sum_p += p - ap;
        sum_g += g - ag;
        n += 1;
    }
    let Some((ap, ag)) = anchor else {
        return Err(Error::NoValidPixels("alignment needs valid points"));
    };
    let mean_p = ap + sum_p / n as f64;
    let mean_g = ag + sum_g / n as f64;

    let (mut num, mut den) = (0.0, 0.0);
    for (p, g) in pairs(pred, gt, masks)? {
        let dp = p - mean_p;
        num += dp.dot(&(g - mean_g));
        den += dp.norm_squared();
    }
    if !(den > 0.0) {
        return Err(Error::DegenerateAlignment);
    }
    let mut scale = num / den;
    let mut degenerate = false;
    if !(scale > 0.0) {
        scale = EPSILON;
        degenerate = true;
    }
    Ok(AlignParams { scale, shift: mean_g - scale * mean_p, degenerate })
}

/// Objective of [`solve_scale_shift`] at a given `(s, t)`.
pub fn alignment_objective<M: AsRef<[bool]>>(
    pred: &[PointMap],
    gt: &[PointMap],
    masks: &[M],
    align: &AlignParams,
) -> Result<f64> {
    Ok(pairs(pred, gt, masks)?.map(|(p, g)| (align.apply(p) - g).norm_squared()).sum())
}

/// Applies the alignment to every valid point.
pub fn apply_alignment(pred: &[PointMap], align: &AlignParams) -> Vec<PointMap> {
    pred.iter()
        .map(|pm| {
            let mut out = pm.clone();
            for (p, &m) in out.data.iter_mut().zip(&pm.mask) {
                if m {
                    *p = align.apply(p);
                }
            }
            out
        })
        .collect()
}

/// `‖x̃ − x‖ / ‖x‖` per scored point; targets with `‖x‖ < min_gt_norm` are skipped.
pub fn relative_errors<M: AsRef<[bool]>>(
    pred_aligned: &[PointMap],
    gt: &[PointMap],
    masks: &[M],
    min_gt_norm: f64,
) -> Result<Vec<f64>> {
    Ok(pairs(pred_aligned, gt, masks)?
        .filter_map(|(p, g)| {
            let norm = g.norm();
            (norm >= min_gt_norm).then(|| (p - g).norm() / norm)
        })
        .collect())
}

fn mean_percent(values: &[f64]) -> f64 {
    100.0 * values.iter().sum::<f64>() / values.len() as f64
}

fn inlier_percent(values: &[f64], threshold: f64) -> f64 {
    100.0 * values.iter().filter(|&&v| v < threshold).count() as f64 / values.len() as f64
}

/// Mean relative point error, in percent.
pub fn rel_p<M: AsRef<[bool]>>(pred_aligned: &[PointMap], gt: &[PointMap], masks: &[M]) -> Result<f64> {
    let errs = relative_errors(pred_aligned, gt, masks, MIN_GT_NORM)?;
    if errs.is_empty() {
        return Err(Error::NoValidPixels("no evaluable points"));
    }
    Ok(mean_percent(&errs))
}

/// Percentage of points whose relative error is strictly below `tau`.
pub fn delta_p<M: AsRef<[bool]>>(pred_aligned: &[PointMap], gt: &[PointMap], masks: &[M], tau: f64) -> Result<f64> {
    let errs = relative_errors(pred_aligned, gt, masks, MIN_GT_NORM)?;
    if errs.is_empty() {
        return Err(Error::NoValidPixels("no evaluable points"));
    }
    Ok(inlier_percent(&errs, tau))
}

/// `‖s·v̂ − v‖` per valid flow pixel. Flows take the geometry scale only.
pub fn flow_errors<M: AsRef<[bool]>>(
    pred: &[SceneFlow],
    gt: &[SceneFlow],
    masks: &[M],
    align: &AlignParams,
) -> Result<Vec<f64>> {
    check_lengths(pred.len(), gt.len(), masks.len())?;
    let mut out = Vec::new();
    for ((p, g), m) in pred.iter().zip(gt).zip(masks) {
        let m = m.as_ref();
        check_grid(p.height, p.width, g.height, g.width, m.len())?;
        for k in 0..m.len() {
            if m[k] {
                out.push((align.scale * p.data[k] - g.data[k]).norm());
            }
        }
    }
    Ok(out)
}

/// Mean end-point error of the scale-aligned flow, in target units.
pub fn epe<M: AsRef<[bool]>>(pred: &[SceneFlow], gt: &[SceneFlow], masks: &[M], align: &AlignParams) -> Result<f64> {
    let errs = flow_errors(pred, gt, masks, align)?;
    if errs.is_empty() {
        return Err(Error::NoValidPixels("no valid flow pixels"));
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Percentage of flow vectors with end-point error strictly below `gamma`.
pub fn apd<M: AsRef<[bool]>>(
    pred: &[SceneFlow],
    gt: &[SceneFlow],
    masks: &[M],
    align: &AlignParams,
    gamma: f64,
) -> Result<f64> {
    let errs = flow_errors(pred, gt, masks, align)?;
    if errs.is_empty() {
        return Err(Error::NoValidPixels("no valid flow pixels"));
    }
    Ok(inlier_percent(&errs, gamma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub tau: f64,
    pub gamma: f64,
    pub min_gt_norm: f64,
}

impl EvalOptions {
    pub fn new(tau: f64, gamma: f64) -> Self {
        Self { tau, gamma, min_gt_norm: MIN_GT_NORM }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rel_p: f64,
    pub delta_p: f64,
    pub tau: f64,
    pub epe: f64,
    pub apd: f64,
    pub gamma: f64,
    pub align: AlignParams,
    pub n_points: usize,
    pub n_flows: usize,
}

fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

impl MetricsReport {
    /// One `key=value` line per metric with six decimals.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let rows = [
            ("rel_p", fixed6(self.rel_p)),
            ("delta_p", fixed6(self.delta_p)),
            ("tau", fixed6(self.tau)),
            ("epe", fixed6(self.epe)),
            ("apd", fixed6(self.apd)),
            ("gamma", fixed6(self.gamma)),
            ("scale", fixed6(self.align.scale)),
            ("shift_x", fixed6(self.align.shift.x)),
            ("shift_y", fixed6(self.align.shift.y)),
            ("shift_z", fixed6(self.align.shift.z)),
            ("n_points", self.n_points.to_string()),
            ("n_flows", self.n_flows.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Parses a `key=value` report back into numbers.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (k, v) = l.split_once('=').ok_or_else(|| Error::InvalidConfig(format!("bad report line `{l}`")))?;
            let v = v.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad number in `{l}`")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Aligns the predicted geometry to the target, then scores geometry and motion.
pub fn evaluate_sequence(pred: &SequenceSample, gt: &SequenceSample, opts: EvalOptions) -> Result<MetricsReport> {
    if pred.frames() != gt.frames() || pred.flows.len() != gt.flows.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} frames / {} flows, target {} / {}",
            pred.frames(),
            pred.flows.len(),
            gt.frames(),
            gt.flows.len()
        )));
    }
    let point_masks: Vec<Vec<bool>> = pred
        .point_maps
        .iter()
        .zip(&gt.point_maps)
        .map(|(p, g)| p.mask.iter().zip(&g.mask).map(|(&a, &b)| a && b).collect())
        .collect();
    let flow_masks: Vec<Vec<bool>> = pred
        .flows
        .iter()
        .zip(&gt.flows)
        .map(|(p, g)| p.mask.iter().zip(&g.mask).map(|(&a, &b)| a && b).collect())
        .collect();

    let align = solve_scale_shift(&pred.point_maps, &gt.point_maps, &point_masks)?;
    let aligned = apply_alignment(&pred.point_maps, &align);
    let rel = relative_errors(&aligned, &gt.point_maps, &point_masks, opts.min_gt_norm)?;
    if rel.is_empty() {
        return Err(Error::NoValidPixels("no evaluable points"));
    }
    let flow = flow_errors(&pred.flows, &gt.flows, &flow_masks, &align)?;
    if flow.is_empty() {
        return Err(Error::NoValidPixels("no valid flow pixels"));
    }
    Ok(MetricsReport {
        rel_p: mean_percent(&rel),
        delta_p: inlier_percent(&rel, opts.tau),
        tau: opts.tau,
        epe: flow.iter().sum::<f64>() / flow.len() as f64,
        apd: inlier_percent(&flow, opts.gamma),
        gamma: opts.gamma,
        align,
        n_points: rel.len(),
        n_flows: flow.len(),
    })
}
