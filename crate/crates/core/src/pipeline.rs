//! Camera-frame sequence → world-frame training sample.
//!
//! Order of operations: canonicalize poses, lift point maps and flows into
//! the first-camera frame, zero non-dynamic flow, normalize, then optionally
//! pad invalid pixels.

use crate::error::{Error, Result};
use crate::flowops::{apply_deformability, flow_to_world};
use crate::geomath::{cam_to_world_points, normalize_poses, pyramid_pad};
use crate::normalize::{canonical_normalize, max_normalize};
use crate::types::{FrameTag, NormMode, SequenceSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessOptions {
    /// `None` keeps metric world coordinates.
    pub norm: Option<NormMode>,
    pub pad: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self { norm: Some(NormMode::Canonical), pad: false }
    }
}

/// Lifts a camera-frame sequence into metric world coordinates.
pub fn to_world(seq: &SequenceSample) -> Result<SequenceSample> {
    for (i, pm) in seq.point_maps.iter().enumerate() {
        if pm.frame != FrameTag::Camera(i) {
            return Err(Error::FrameMismatch { expected: format!("camera({i})"), found: pm.frame });
        }
    }
    if seq.frames() < 2 {
        return Err(Error::TooFewFrames(seq.frames()));
    }
    if seq.flows.len() + 1 != seq.frames() || seq.poses.len() != seq.frames() {
        return Err(Error::ShapeMismatch(format!(
            "{} frames need {} flows and {} poses, got {} and {}",
            seq.frames(),
            seq.frames() - 1,
            seq.frames(),
            seq.flows.len(),
            seq.poses.len()
        )));
    }

    let poses = normalize_poses(&seq.poses)?;
    let point_maps = seq
        .point_maps
        .iter()
        .zip(&poses)
        .map(|(pm, pose)| cam_to_world_points(pm, pose))
        .collect::<Result<Vec<_>>>()?;

    let mut flows = Vec::with_capacity(seq.flows.len());
    for (i, fl) in seq.flows.iter().enumerate() {
        let mut world = flow_to_world(&seq.point_maps[i], fl, &poses[i], &poses[i + 1])?;
        if let Some(dm) = &seq.deformability {
            let dynamic = dm.get(i).ok_or_else(|| Error::ShapeMismatch(format!("missing deformability mask {i}")))?;
            world = apply_deformability(&world, dynamic)?;
        }
        flows.push(world);
    }

    Ok(SequenceSample {
        point_maps,
        flows,
        poses,
        intrinsics: seq.intrinsics,
        deformability: seq.deformability.clone(),
        norm: None,
    })
}

/// Full preprocessing of a camera-frame sequence.
pub fn preprocess(seq: &SequenceSample, opts: PreprocessOptions) -> Result<SequenceSample> {
    let world = to_world(seq)?;
    let mut out = match opts.norm {
        None => world,
        Some(NormMode::Canonical) => canonical_normalize(&world)?.0,
        Some(NormMode::Max) => max_normalize(&world)?.0,
    };
    if opts.pad {
        for pm in &mut out.point_maps {
            if pm.valid_count() > 0 {
                *pm = pyramid_pad(pm)?;
            }
        }
    }
    Ok(out)
}
