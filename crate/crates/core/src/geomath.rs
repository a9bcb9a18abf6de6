//! Rigid-transform canonicalization, camera/world transforms, depth
//! projection, surface normals and pyramid padding.

use crate::error::{Error, Result};
use crate::types::{CameraIntrinsics, CameraPose, FrameTag, GridShape, PointMap};
use crate::{Mat3, Vec3};

/// Depths at or below this are treated as behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;

/// Depth along the camera `z` axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Unit surface normals; invalid entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Vec3>,
    pub mask: Vec<bool>,
}

/// Re-expresses every pose relative to the first camera.
///
/// `output[i] = (R₀ᵀ Rᵢ, R₀ᵀ (tᵢ − t₀))`, so `output[0]` is the identity.
pub fn normalize_poses(poses: &[CameraPose]) -> Result<Vec<CameraPose>> {
    let first = poses.first().ok_or(Error::EmptyPoses)?;
    let r0t = first.rotation.transpose();
    Ok(poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i == 0 {
                CameraPose::identity()
            } else {
                CameraPose::new(r0t * p.rotation, r0t * (p.translation - first.translation))
            }
        })
        .collect())
}

/// Maps a camera-frame point map into world coordinates with a canonical pose.
pub fn cam_to_world_points(pm: &PointMap, pose: &CameraPose) -> Result<PointMap> {
    if !matches!(pm.frame, FrameTag::Camera(_)) {
        return Err(Error::FrameMismatch { expected: "camera(i)".into(), found: pm.frame });
    }
    let data = pm
        .data
        .iter()
        .zip(&pm.mask)
        .map(|(p, &m)| if m { pose.transform_point(p) } else { Vec3::zeros() })
        .collect();
    Ok(PointMap { height: pm.height, width: pm.width, data, mask: pm.mask.clone(), frame: FrameTag::World })
}

/// Inverse of [`cam_to_world_points`] for frame `index`.
pub fn world_to_cam_points(pm: &PointMap, pose: &CameraPose, index: usize) -> Result<PointMap> {
    if !pm.frame.is_world() {
        return Err(Error::FrameMismatch { expected: "world".into(), found: pm.frame });
    }
    let data = pm
        .data
        .iter()
        .zip(&pm.mask)
        .map(|(p, &m)| if m { pose.inverse_transform_point(p) } else { Vec3::zeros() })
        .collect();
    Ok(PointMap {
        height: pm.height,
        width: pm.width,
        data,
        mask: pm.mask.clone(),
        frame: FrameTag::Camera(index),
    })
}

/// Camera-`z` depth of one world point.
#[inline]
pub(crate) fn point_depth(rotation: &Mat3, translation: &Vec3, p: &Vec3) -> f64 {
    // third row of Rᵀ is the third column of R
    rotation.column(2).dot(&(p - translation))
}

/// Per-pixel depth of a world point map seen from `pose`.
///
/// The point map is pixel-aligned with the camera grid, so each pixel keeps
/// its own depth; no resampling happens. Points with `z ≤ MIN_DEPTH` become
/// invalid.
pub fn project_depth(pm: &PointMap, pose: &CameraPose, intrinsics: &CameraIntrinsics) -> Result<DepthMap> {
    if !pm.frame.is_world() {
        return Err(Error::FrameMismatch { expected: "world".into(), found: pm.frame });
    }
    if intrinsics.width != pm.width || intrinsics.height != pm.height {
        return Err(Error::ShapeMismatch(format!(
            "intrinsics are {}x{} but point map is {}x{}",
            intrinsics.height, intrinsics.width, pm.height, pm.width
        )));
    }
    let mut data = Vec::with_capacity(pm.len());
    let mut mask = Vec::with_capacity(pm.len());
    for (p, &m) in pm.data.iter().zip(&pm.mask) {
        let z = if m { point_depth(&pose.rotation, &pose.translation, p) } else { 0.0 };
        if m && z > MIN_DEPTH {
            data.push(z);
            mask.push(true);
        } else {
            data.push(0.0);
            mask.push(false);
        }
    }
    Ok(DepthMap { height: pm.height, width: pm.width, data, mask })
}

/// Central-difference tangents and their (unnormalized) normal at each
/// interior pixel whose 5-point stencil is fully valid.
///
/// The normal is `∂y × ∂x` (row derivative crossed with column derivative),
/// so a fronto-parallel surface in front of the camera gets `−z`.
pub(crate) struct Stencil {
    pub tx: Vec3,
    pub ty: Vec3,
    pub cross: Vec3,
}

pub(crate) fn stencils(data: &[Vec3], mask: &[bool], height: usize, width: usize) -> Vec<Option<Stencil>> {
    let mut out: Vec<Option<Stencil>> = (0..height * width).map(|_| None).collect();
    if height < 3 || width < 3 {
        return out;
    }
    for r in 1..height - 1 {
        for c in 1..width - 1 {
            let i = r * width + c;
            let (left, right, up, down) = (i - 1, i + 1, i - width, i + width);
            if !(mask[i] && mask[left] && mask[right] && mask[up] && mask[down]) {
                continue;
            }
            let tx = data[right] - data[left];
            let ty = data[down] - data[up];
            let cross = ty.cross(&tx);
            let norm = cross.norm();
            if norm > 0.0 && norm.is_finite() {
                out[i] = Some(Stencil { tx, ty, cross });
            }
        }
    }
    out
}

/// Surface normals from central differences of the point map.
pub fn compute_normals(pm: &PointMap, mask: &[bool]) -> Result<NormalMap> {
    if pm.height < 3 || pm.width < 3 {
        return Err(Error::DegenerateSize { height: pm.height, width: pm.width, min: 3 });
    }
    if mask.len() != pm.len() {
        return Err(Error::ShapeMismatch(format!("mask has {} entries, point map {}", mask.len(), pm.len())));
    }
    let st = stencils(&pm.data, mask, pm.height, pm.width);
    let mut data = Vec::with_capacity(pm.len());
    let mut out_mask = Vec::with_capacity(pm.len());
    for s in st {
        match s {
            Some(s) => {
                data.push(s.cross.normalize());
                out_mask.push(true);
            }
            None => {
                data.push(Vec3::zeros());
                out_mask.push(false);
            }
        }
    }
    Ok(NormalMap { height: pm.height, width: pm.width, data, mask: out_mask })
}

struct Level {
    height: usize,
    width: usize,
    sum: Vec<Vec3>,
    weight: Vec<f64>,
}

impl Level {
    fn downsample(&self) -> Level {
        let height = self.height.div_ceil(2);
        let width = self.width.div_ceil(2);
        let mut sum = vec![Vec3::zeros(); height * width];
        let mut weight = vec![0.0; height * width];
        for r in 0..self.height {
            for c in 0..self.width {
                let dst = (r / 2) * width + c / 2;
                let src = r * self.width + c;
                sum[dst] += self.sum[src];
                weight[dst] += self.weight[src];
            }
        }
        Level { height, width, sum, weight }
    }
}

/// Fills invalid pixels from a mask-weighted average pyramid.
///
/// Valid pixels are copied unchanged and the mask is kept; each invalid pixel
/// takes the average of the finest coarser cell covering it that holds any
/// valid weight.
pub fn pyramid_pad(pm: &PointMap) -> Result<PointMap> {
    if pm.valid_count() == 0 {
        return Err(Error::NoValidPixels("pyramid padding needs at least one valid pixel"));
    }
    let base = Level {
        height: pm.height,
        width: pm.width,
        sum: pm.data.iter().zip(&pm.mask).map(|(p, &m)| if m { *p } else { Vec3::zeros() }).collect(),
        weight: pm.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    };
    let mut levels = vec![base];
    while levels.last().is_some_and(|l| l.height > 1 || l.width > 1) {
        let next = levels.last().unwrap().downsample();
        levels.push(next);
    }

    let mut out = pm.clone();
    for r in 0..pm.height {
        for c in 0..pm.width {
            let i = pm.idx(r, c);
            if pm.mask[i] {
                continue;
            }
            for (k, level) in levels.iter().enumerate().skip(1) {
                let j = (r >> k) * level.width + (c >> k);
                if level.weight[j] > 0.0 {
                    out.data[i] = level.sum[j] / level.weight[j];
                    break;
                }
            }
        }
    }
    Ok(out)
}

impl GridShape for DepthMap {
    fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}
