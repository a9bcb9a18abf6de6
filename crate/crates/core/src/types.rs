//! Shared domain types: point maps, scene flows, cameras and sequences.
//!
//! Pixel `(r, c)` lives at flat index `r * width + c`. Invalid pixels carry
//! the placeholder `(0, 0, 0)` unless a cosmetic fill (pyramid padding) has
//! been applied. Cameras follow the pinhole convention with `+z` forward,
//! `+x` right and `+y` down.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::{Mat3, Vec3, EPSILON};

/// Tolerance for the rotation orthonormality and determinant checks.
pub const ROTATION_TOL: f64 = 1e-6;

/// Coordinate frame a point map or flow is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameTag {
    /// Camera coordinates of frame `i`.
    Camera(usize),
    /// First-camera (world) coordinates, metric units.
    World,
    /// World coordinates after sequence normalization.
    WorldNormalized,
}

impl FrameTag {
    pub fn is_world(self) -> bool {
        matches!(self, FrameTag::World | FrameTag::WorldNormalized)
    }
}

impl fmt::Display for FrameTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameTag::Camera(i) => write!(f, "camera({i})"),
            FrameTag::World => f.write_str("world"),
            FrameTag::WorldNormalized => f.write_str("world-normalized"),
        }
    }
}

impl FromStr for FrameTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "world" => Ok(FrameTag::World),
            "world-normalized" => Ok(FrameTag::WorldNormalized),
            _ => s
                .strip_prefix("camera(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|idx| idx.parse().ok())
                .map(FrameTag::Camera)
                .ok_or_else(|| format!("unknown frame tag `{s}`")),
        }
    }
}

macro_rules! impl_grid {
    ($ty:ident) => {
        impl $ty {
            /// Builds the map, checking that data and mask cover `height * width` pixels.
            pub fn new(
                height: usize,
                width: usize,
                data: Vec<Vec3>,
                mask: Vec<bool>,
                frame: FrameTag,
            ) -> Result<Self> {
                let n = height * width;
                if data.len() != n || mask.len() != n {
                    return Err(Error::ShapeMismatch(format!(
                        "{}x{} map needs {n} entries, got data={} mask={}",
                        height,
                        width,
                        data.len(),
                        mask.len()
                    )));
                }
                Ok(Self { height, width, data, mask, frame })
            }

            /// Builds a map from a per-pixel closure; `None` marks the pixel invalid.
            pub fn from_fn(
                height: usize,
                width: usize,
                frame: FrameTag,
                mut f: impl FnMut(usize, usize) -> Option<Vec3>,
            ) -> Self {
                let mut data = Vec::with_capacity(height * width);
                let mut mask = Vec::with_capacity(height * width);
                for r in 0..height {
                    for c in 0..width {
                        match f(r, c) {
                            Some(v) => {
                                data.push(v);
                                mask.push(true);
                            }
                            None => {
                                data.push(Vec3::zeros());
                                mask.push(false);
                            }
                        }
                    }
                }
                Self { height, width, data, mask, frame }
            }

            #[inline]
            pub fn idx(&self, r: usize, c: usize) -> usize {
                r * self.width + c
            }

            pub fn len(&self) -> usize {
                self.data.len()
            }

            pub fn is_empty(&self) -> bool {
                self.data.is_empty()
            }

            pub fn valid_count(&self) -> usize {
                self.mask.iter().filter(|&&m| m).count()
            }

            pub fn same_shape<T: GridShape>(&self, other: &T) -> bool {
                self.height == other.shape().0 && self.width == other.shape().1
            }
        }

        impl GridShape for $ty {
            fn shape(&self) -> (usize, usize) {
                (self.height, self.width)
            }
        }
    };
}

/// Anything laid out on an `H × W` pixel grid.
pub trait GridShape {
    fn shape(&self) -> (usize, usize);
}

/// Per-pixel 3D coordinates of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Vec3>,
    pub mask: Vec<bool>,
    pub frame: FrameTag,
}

impl_grid!(PointMap);

/// Per-pixel 3D motion from frame `i` to `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFlow {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Vec3>,
    pub mask: Vec<bool>,
    pub frame: FrameTag,
}

impl_grid!(SceneFlow);

impl SceneFlow {
    pub fn zeros(height: usize, width: usize, frame: FrameTag) -> Self {
        Self {
            height,
            width,
            data: vec![Vec3::zeros(); height * width],
            mask: vec![true; height * width],
            frame,
        }
    }
}

/// Pinhole projection parameters, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// Camera-frame direction (with unit `z`) through the centre of pixel `(r, c)`.
    ///
    /// Pixel `(r, c)` spans `[c, c + 1) × [r, r + 1)` in image coordinates.
    pub fn pixel_ray(&self, r: usize, c: usize) -> Vec3 {
        Vec3::new(
            (c as f64 + 0.5 - self.cx) / self.fx,
            (r as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.fx > 0.0 && self.fy > 0.0) {
            out.push(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            out.push(format!("cx={} outside [0, {})", self.cx, self.width));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            out.push(format!("cy={} outside [0, {})", self.cy, self.height));
        }
        out
    }
}

/// Rigid camera-to-world transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for CameraPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl CameraPose {
    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    /// Camera → world.
    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// World → camera.
    #[inline]
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &CameraPose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Self {
        Self {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    /// Largest elementwise deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Mat3::identity()).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Canonical,
    Max,
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormMode::Canonical => "canonical",
            NormMode::Max => "max",
        })
    }
}

impl FromStr for NormMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "canonical" => Ok(NormMode::Canonical),
            "max" => Ok(NormMode::Max),
            _ => Err(format!("unknown normalization mode `{s}`")),
        }
    }
}

/// Sequence normalization: `x ↦ (x − mu) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub mu: Vec3,
    pub scale: f64,
    pub mode: NormMode,
}

/// An `N`-frame bundle of point maps, forward flows and cameras.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub point_maps: Vec<PointMap>,
    /// `flows[i]` maps frame `i` to `i + 1`; there are `N − 1` of them.
    pub flows: Vec<SceneFlow>,
    pub poses: Vec<CameraPose>,
    pub intrinsics: CameraIntrinsics,
    /// `true` marks dynamic pixels; one map per flow.
    pub deformability: Option<Vec<Vec<bool>>>,
    pub norm: Option<NormParams>,
}

impl SequenceSample {
    /// Assembles a sequence, rejecting single-frame bundles.
    pub fn new(
        point_maps: Vec<PointMap>,
        flows: Vec<SceneFlow>,
        poses: Vec<CameraPose>,
        intrinsics: CameraIntrinsics,
    ) -> Result<Self> {
        if point_maps.len() < 2 {
            return Err(Error::TooFewFrames(point_maps.len()));
        }
        Ok(Self { point_maps, flows, poses, intrinsics, deformability: None, norm: None })
    }

    pub fn frames(&self) -> usize {
        self.point_maps.len()
    }

    pub fn height(&self) -> usize {
        self.point_maps.first().map_or(0, |p| p.height)
    }

    pub fn width(&self) -> usize {
        self.point_maps.first().map_or(0, |p| p.width)
    }

    /// All valid points across frames, in frame order.
    pub fn valid_points(&self) -> impl Iterator<Item = &Vec3> {
        self.point_maps
            .iter()
            .flat_map(|pm| pm.data.iter().zip(&pm.mask).filter(|(_, &m)| m).map(|(p, _)| p))
    }
}

/// One broken invariant found by [`validate_sequence`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub frame: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(i) => write!(f, "{}[{}]: {}", self.field, i, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Lists every type invariant the sequence breaks. Empty means well-formed.
pub fn validate_sequence(seq: &SequenceSample) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field, frame, message: String| out.push(Violation { field, frame, message });

    let n = seq.frames();
    if n < 2 {
        push("point_maps", None, format!("need at least 2 frames, got {n}"));
    }
    if seq.flows.len() + 1 != n {
        push(
            "flows",
            None,
            format!("flow count must be N-1 = {}, got {}", n.saturating_sub(1), seq.flows.len()),
        );
    }
    if seq.poses.len() != n {
        push("poses", None, format!("pose count must be N = {n}, got {}", seq.poses.len()));
    }

    let (h, w) = (seq.height(), seq.width());
    let world_tag = seq.point_maps.first().map(|p| p.frame).filter(|t| t.is_world());

    for (i, pm) in seq.point_maps.iter().enumerate() {
        if pm.height != h || pm.width != w {
            push("point_maps", Some(i), format!("shape {}x{} differs from {h}x{w}", pm.height, pm.width));
        }
        if pm.data.len() != pm.height * pm.width || pm.mask.len() != pm.height * pm.width {
            push("point_maps", Some(i), "data/mask length does not match shape".into());
        }
        if pm.data.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            push("point_maps", Some(i), "non-finite coordinates".into());
        }
        let expected = world_tag.unwrap_or(FrameTag::Camera(i));
        if pm.frame != expected {
            push("point_maps", Some(i), format!("frame tag {} but expected {expected}", pm.frame));
        }
    }

    for (i, fl) in seq.flows.iter().enumerate() {
        if fl.height != h || fl.width != w {
            push("flows", Some(i), format!("shape {}x{} differs from {h}x{w}", fl.height, fl.width));
        }
        if fl.data.len() != fl.height * fl.width || fl.mask.len() != fl.height * fl.width {
            push("flows", Some(i), "data/mask length does not match shape".into());
        }
        if fl.data.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            push("flows", Some(i), "non-finite flow vectors".into());
        }
        if fl.data.iter().zip(&fl.mask).any(|(v, &m)| !m && *v != Vec3::zeros()) {
            push("flows", Some(i), "masked-out flow entries must be zero".into());
        }
        let expected = world_tag.unwrap_or(FrameTag::Camera(i));
        if fl.frame != expected {
            push("flows", Some(i), format!("frame tag {} but expected {expected}", fl.frame));
        }
    }

    for (i, pose) in seq.poses.iter().enumerate() {
        let err = pose.orthonormality_error();
        if !(err <= ROTATION_TOL) {
            push("poses", Some(i), format!("rotation not orthonormal (max |RᵀR − I| = {err:.3e})"));
        } else {
            // only meaningful once RᵀR = I: separates reflections from rotations
            let det = pose.rotation.determinant();
            if !((det - 1.0).abs() <= ROTATION_TOL) {
                push("poses", Some(i), format!("rotation determinant {det} is not +1"));
            }
        }
        if !pose.translation.iter().all(|v| v.is_finite()) {
            push("poses", Some(i), "non-finite translation".into());
        }
    }

    for msg in seq.intrinsics.problems() {
        push("intrinsics", None, msg);
    }

    if let Some(dm) = &seq.deformability {
        if dm.len() + 1 != n {
            push("deformability", None, format!("expected {} masks, got {}", n.saturating_sub(1), dm.len()));
        }
        for (i, m) in dm.iter().enumerate() {
            if m.len() != h * w {
                push("deformability", Some(i), format!("mask has {} entries, expected {}", m.len(), h * w));
            }
        }
    }

    if let Some(norm) = &seq.norm {
        if !(norm.scale >= EPSILON) {
            push("norm", None, format!("scale {} below epsilon {EPSILON}", norm.scale));
        }
        if !norm.mu.iter().all(|v| v.is_finite()) {
            push("norm", None, "non-finite centroid".into());
        }
    }

    out
}
