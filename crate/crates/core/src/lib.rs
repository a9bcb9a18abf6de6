//! World-centric geometry and motion for dynamic scenes.
//!
//! The crate converts camera-frame depth, pose and scene-flow data into
//! normalized world-frame point maps and scene flows, provides the geometry
//! and motion training objectives with analytic gradients, implements the
//! world-space evaluation protocol, and ships a procedural ray-cast scene
//! generator that serves as ground truth for all of the above.
//!
//! Internal math is `f64` throughout; on-disk tensors are `f32`
//! (see [`io`]).

pub mod error;
pub mod flowops;
pub mod geomath;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate_sequence, CameraIntrinsics, CameraPose, FrameTag, NormMode, NormParams, PointMap,
    SceneFlow, SequenceSample, Violation,
};

/// 3-vector used for points, flows and translations.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrix used for rotations.
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Stability constant added to normalization scales.
pub const EPSILON: f64 = 1e-8;
