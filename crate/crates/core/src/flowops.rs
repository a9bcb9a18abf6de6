//! World-frame scene flow, deformed point maps and deformability masking.

use crate::error::{Error, Result};
use crate::types::{CameraPose, FrameTag, PointMap, SceneFlow};
use crate::Vec3;

fn check_shape(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{what}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1)));
    }
    Ok(())
}

/// Converts camera-frame flow of frame `i` into world-frame flow.
///
/// The camera-frame flow lands the point in camera `i + 1` coordinates, so
/// the advected point goes through `pose_next` and the origin point through
/// `pose`. Both poses must already be canonical.
pub fn flow_to_world(
    pm_cam: &PointMap,
    flow_cam: &SceneFlow,
    pose: &CameraPose,
    pose_next: &CameraPose,
) -> Result<SceneFlow> {
    let FrameTag::Camera(i) = pm_cam.frame else {
        return Err(Error::FrameMismatch { expected: "camera(i)".into(), found: pm_cam.frame });
    };
    if flow_cam.frame != FrameTag::Camera(i) {
        return Err(Error::FrameMismatch { expected: format!("camera({i})"), found: flow_cam.frame });
    }
    check_shape((pm_cam.height, pm_cam.width), (flow_cam.height, flow_cam.width), "flow_to_world")?;

    let mut data = Vec::with_capacity(pm_cam.len());
    let mut mask = Vec::with_capacity(pm_cam.len());
    for k in 0..pm_cam.len() {
        let valid = pm_cam.mask[k] && flow_cam.mask[k];
        mask.push(valid);
        if valid {
            let x = pm_cam.data[k];
            let start = pose.transform_point(&x);
            let end = pose_next.transform_point(&(x + flow_cam.data[k]));
            data.push(end - start);
        } else {
            data.push(Vec3::zeros());
        }
    }
    Ok(SceneFlow { height: pm_cam.height, width: pm_cam.width, data, mask, frame: FrameTag::World })
}

/// The deformed point map `X + V`, pixel-aligned with frame `i`.
pub fn deform(pm: &PointMap, flow: &SceneFlow) -> Result<PointMap> {
    check_shape((pm.height, pm.width), (flow.height, flow.width), "deform")?;
    let mut data = Vec::with_capacity(pm.len());
    let mut mask = Vec::with_capacity(pm.len());
    for k in 0..pm.len() {
        let valid = pm.mask[k] && flow.mask[k];
        mask.push(valid);
        data.push(if valid { pm.data[k] + flow.data[k] } else { Vec3::zeros() });
    }
    Ok(PointMap { height: pm.height, width: pm.width, data, mask, frame: pm.frame })
}

/// Zeroes flow outside the dynamic region; the validity mask is kept.
pub fn apply_deformability(flow: &SceneFlow, dynamic: &[bool]) -> Result<SceneFlow> {
    if dynamic.len() != flow.len() {
        return Err(Error::ShapeMismatch(format!(
            "deformability mask has {} entries, flow {}",
            dynamic.len(),
            flow.len()
        )));
    }
    let mut out = flow.clone();
    for (v, &d) in out.data.iter_mut().zip(dynamic) {
        if !d {
            *v = Vec3::zeros();
        }
    }
    Ok(out)
}
