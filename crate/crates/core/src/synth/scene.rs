use nalgebra::{Rotation3, Unit};

use crate::{Mat3, Vec3};

/// Hits closer than this along the ray are ignored.
const MIN_HIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Infinite plane through `point`.
    Plane { point: Vec3, normal: Vec3 },
    Sphere { center: Vec3, radius: f64 },
    /// Oriented box; `rotation` maps box axes to world axes.
    Cuboid { center: Vec3, rotation: Mat3, half: Vec3 },
}

impl Shape {
    /// Ray parameter of the nearest hit of `origin + λ dir` with `λ > MIN_HIT`.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        match self {
            Shape::Plane { point, normal } => {
                let denom = normal.dot(dir);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let lambda = normal.dot(&(point - origin)) / denom;
                (lambda > MIN_HIT).then_some(lambda)
            }
            Shape::Sphere { center, radius } => {
                let oc = origin - center;
                let a = dir.dot(dir);
                let b = 2.0 * dir.dot(&oc);
                let c = oc.dot(&oc) - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)].into_iter().find(|&l| l > MIN_HIT)
            }
            Shape::Cuboid { center, rotation, half } => {
                let o = rotation.transpose() * (origin - center);
                let d = rotation.transpose() * dir;
                let (mut near, mut far) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in 0..3 {
                    if d[a].abs() < 1e-15 {
                        if o[a].abs() > half[a] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (-half[a] - o[a]) / d[a];
                    let t2 = (half[a] - o[a]) / d[a];
                    near = near.max(t1.min(t2));
                    far = far.min(t1.max(t2));
                }
                if far < near.max(MIN_HIT) {
                    return None;
                }
                Some(if near > MIN_HIT { near } else { far })
            }
        }
    }

    fn moved(&self, center: Vec3, spin: &Mat3) -> Shape {
        match self {
            Shape::Plane { .. } => self.clone(),
            Shape::Sphere { radius, .. } => Shape::Sphere { center, radius: *radius },
            Shape::Cuboid { rotation, half, .. } => Shape::Cuboid { center, rotation: spin * rotation, half: *half },
        }
    }

    fn center(&self) -> Vec3 {
        match self {
            Shape::Plane { point, .. } => *point,
            Shape::Sphere { center, .. } | Shape::Cuboid { center, .. } => *center,
        }
    }
}

/// Constant per-frame rigid motion about the body's own centre.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidMotion {
    pub velocity: Vec3,
    pub axis: Unit<Vec3>,
    /// Rotation per frame in radians.
    pub angle: f64,
}

impl RigidMotion {
    fn spin(&self, frames: f64) -> Mat3 {
        Rotation3::from_axis_angle(&self.axis, self.angle * frames).into_inner()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    /// Shape at frame 0.
    pub shape: Shape,
    /// `None` for static background.
    pub motion: Option<RigidMotion>,
}

impl Body {
    pub fn is_mover(&self) -> bool {
        self.motion.is_some()
    }

    fn center_at(&self, frame: usize) -> Vec3 {
        match &self.motion {
            Some(m) => self.shape.center() + m.velocity * frame as f64,
            None => self.shape.center(),
        }
    }

    /// Shape posed at `frame`.
    pub fn shape_at(&self, frame: usize) -> Shape {
        match &self.motion {
            Some(m) => self.shape.moved(self.center_at(frame), &m.spin(frame as f64)),
            None => self.shape.clone(),
        }
    }

    /// Where a surface point at `frame` sits one frame later.
    pub fn advance(&self, p: &Vec3, frame: usize) -> Vec3 {
        match &self.motion {
            Some(m) => self.center_at(frame + 1) + m.spin(1.0) * (p - self.center_at(frame)),
            None => *p,
        }
    }
}

/// Nearest hit over all bodies: (body index, ray parameter).
pub fn cast(shapes: &[Shape], origin: &Vec3, dir: &Vec3) -> Option<(usize, f64)> {
    shapes
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.intersect(origin, dir).map(|l| (i, l)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Camera rotation (columns right, down, forward) looking from `eye` at
/// `target` with image-down along world +y.
pub fn look_at(eye: &Vec3, target: &Vec3) -> Mat3 {
    let f = (target - eye).normalize();
    let r = Vec3::new(0.0, 1.0, 0.0).cross(&f).normalize();
    let d = f.cross(&r);
    Mat3::from_columns(&[r, d, f])
}
