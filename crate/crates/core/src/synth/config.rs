use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Static,
    /// Arc around the look-at target, `step_deg` per frame, centred on frame `(N − 1) / 2`.
    Orbit { radius: f64, step_deg: f64, height: f64 },
    /// Straight move along the initial viewing axis, `step` units per frame.
    Dolly { radius: f64, height: f64, step: f64 },
}

/// Parameters of a procedural scene.
///
/// Text form: one `key = value` per line, `#` starts a comment, unknown keys
/// are rejected. Keys and defaults:
///
/// ```text
/// height = 64            # image rows
/// width = 64             # image columns
/// frames = 8             # N >= 2
/// trajectory = orbit     # static | orbit | dolly
/// orbit_radius = 7       # distance from the look-at target
/// orbit_step_deg = 3     # orbit only
/// camera_height = 1      # eye height above the look-at target
/// dolly_step = 0.2       # dolly only
/// focal = 0.9            # fx = fy = focal * width
/// ground_plane = true
/// back_wall = true
/// background_boxes = 2
/// movers = 2
/// max_speed = 0.15       # mover translation per frame
/// max_spin_deg = 4       # mover rotation per frame
/// seed = 0
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub trajectory: Trajectory,
    pub focal: f64,
    pub ground_plane: bool,
    pub back_wall: bool,
    pub background_boxes: usize,
    pub movers: usize,
    pub max_speed: f64,
    pub max_spin_deg: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            frames: 8,
            trajectory: Trajectory::Orbit { radius: 7.0, step_deg: 3.0, height: 1.0 },
            focal: 0.9,
            ground_plane: true,
            back_wall: true,
            background_boxes: 2,
            movers: 2,
            max_speed: 0.15,
            max_spin_deg: 4.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.frames < 2 {
            return bad(format!("frames = {} but at least 2 are required", self.frames));
        }
        if self.height == 0 || self.width == 0 {
            return bad("resolution must be non-zero".into());
        }
        if !self.ground_plane && !self.back_wall && self.background_boxes == 0 {
            return bad("at least one background primitive is required".into());
        }
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return bad(format!("focal = {} must be positive", self.focal));
        }
        if !self.max_speed.is_finite() || !self.max_spin_deg.is_finite() || self.max_speed < 0.0 || self.max_spin_deg < 0.0 {
            return bad("mover velocities must be finite and non-negative".into());
        }
        let finite = match self.trajectory {
            Trajectory::Static => true,
            Trajectory::Orbit { radius, step_deg, height } => [radius, step_deg, height].iter().all(|v| v.is_finite()),
            Trajectory::Dolly { radius, height, step } => [radius, height, step].iter().all(|v| v.is_finite()),
        };
        if !finite {
            return bad("trajectory parameters must be finite".into());
        }
        Ok(())
    }
}

impl FromStr for SceneConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = SceneConfig::default();
        let mut kind = String::from("orbit");
        let (mut radius, mut step_deg, mut cam_height, mut dolly_step) = (7.0, 3.0, 1.0, 0.2);

        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let err = || Error::InvalidConfig(format!("line {}: bad value `{v}` for `{k}`", no + 1));
            macro_rules! parse {
                () => {
                    v.parse().map_err(|_| err())?
                };
            }
            match k {
                "height" => cfg.height = parse!(),
                "width" => cfg.width = parse!(),
                "frames" => cfg.frames = parse!(),
                "trajectory" => kind = v.to_string(),
                "orbit_radius" => radius = parse!(),
                "orbit_step_deg" => step_deg = parse!(),
                "camera_height" => cam_height = parse!(),
                "dolly_step" => dolly_step = parse!(),
                "focal" => cfg.focal = parse!(),
                "ground_plane" => cfg.ground_plane = parse!(),
                "back_wall" => cfg.back_wall = parse!(),
                "background_boxes" => cfg.background_boxes = parse!(),
                "movers" => cfg.movers = parse!(),
                "max_speed" => cfg.max_speed = parse!(),
                "max_spin_deg" => cfg.max_spin_deg = parse!(),
                "seed" => cfg.seed = parse!(),
                _ => return Err(Error::InvalidConfig(format!("line {}: unknown key `{k}`", no + 1))),
            }
        }
        cfg.trajectory = match kind.as_str() {
            "static" => Trajectory::Static,
            "orbit" => Trajectory::Orbit { radius, step_deg, height: cam_height },
            "dolly" => Trajectory::Dolly { radius, height: cam_height, step: dolly_step },
            other => return Err(Error::InvalidConfig(format!("unknown trajectory `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
