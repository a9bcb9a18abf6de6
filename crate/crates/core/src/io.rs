//! On-disk formats: single tensors and sequence directories.
//!
//! Tensor file layout (all integers little-endian `u32`):
//!
//! ```text
//! magic  "4DK1"
//! dtype  1 = f32, 2 = u8 bool
//! rank
//! dims   rank × u32
//! payload, row-major, little-endian
//! ```
//!
//! A sequence directory holds `manifest.txt` plus one tensor file per role
//! and frame. See `FORMATS.md` at the repository root for the full layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::types::{CameraIntrinsics, CameraPose, FrameTag, NormMode, NormParams, PointMap, SceneFlow, SequenceSample};
use crate::Vec3;

pub const MAGIC: &[u8; 4] = b"4DK1";
pub const DTYPE_F32: u32 = 1;
pub const DTYPE_BOOL: u32 = 2;
pub const MANIFEST: &str = "manifest.txt";
const FORMAT_TAG: &str = "4dk-seq/1";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: bad magic bytes")]
    BadMagic { path: String },
    #[error("{path}: unsupported dtype code {code}")]
    UnsupportedDtype { path: String, code: u32 },
    #[error("{path}: truncated header")]
    TruncatedHeader { path: String },
    #[error("{path}: payload length mismatch (expected {expected} bytes, found {found})")]
    PayloadLength { path: String, expected: usize, found: usize },
    #[error("{path}: dim mismatch (expected {expected:?}, found {found:?})")]
    DimMismatch { path: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("{path}: wrong dtype (expected code {expected}, found {found})")]
    WrongDtype { path: String, expected: u32, found: u32 },
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("flow count: manifest declares {frames} frames so {expected} flow files are required, found {found}")]
    FlowCount { frames: usize, expected: usize, found: usize },
    #[error("frame count: manifest declares {expected} frames, found {found} point map files")]
    FrameCount { expected: usize, found: usize },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("cannot store sequence: {0}")]
    Unstorable(String),
    #[error("{path}: {source}")]
    Os { path: String, source: std::io::Error },
}

impl IoError {
    /// Stable numeric code, distinct per failure kind. The CLI exits with it.
    pub fn code(&self) -> u8 {
        match self {
            IoError::BadMagic { .. } => 10,
            IoError::UnsupportedDtype { .. } => 11,
            IoError::TruncatedHeader { .. } => 12,
            IoError::PayloadLength { .. } => 13,
            IoError::DimMismatch { .. } => 14,
            IoError::WrongDtype { .. } => 15,
            IoError::MissingFile(_) => 16,
            IoError::FlowCount { .. } => 17,
            IoError::FrameCount { .. } => 18,
            IoError::Manifest(_) => 19,
            IoError::Unstorable(_) => 20,
            IoError::Os { .. } => 21,
        }
    }
}

type IoResult<T> = std::result::Result<T, IoError>;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    Bool(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    fn dtype(&self) -> u32 {
        match self.data {
            TensorData::F32(_) => DTYPE_F32,
            TensorData::Bool(_) => DTYPE_BOOL,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let count: usize = self.dims.iter().product();
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + 4 * count);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.dtype().to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::Bool(v) => out.extend(v.iter().map(|&b| b as u8)),
        }
        out
    }

    /// Parses one tensor file; `path` is only used in error messages.
    pub fn decode(bytes: &[u8], path: &str) -> IoResult<Tensor> {
        let truncated = || IoError::TruncatedHeader { path: path.to_string() };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(IoError::BadMagic { path: path.to_string() });
        }
        let word = |k: usize| -> IoResult<u32> {
            let start = 4 + 4 * k;
            bytes
                .get(start..start + 4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .ok_or_else(truncated)
        };
        let dtype = word(0)?;
        let elem: usize = match dtype {
            DTYPE_F32 => 4,
            DTYPE_BOOL => 1,
            code => return Err(IoError::UnsupportedDtype { path: path.to_string(), code }),
        };
        let rank = word(1)? as usize;
        let dims = (0..rank).map(|k| word(2 + k).map(|d| d as usize)).collect::<IoResult<Vec<_>>>()?;
        let header = 12 + 4 * rank;
        let payload = &bytes[header..];
        // an overflowing element count can never match the payload
        let expected = dims.iter().try_fold(elem, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
        if payload.len() != expected {
            return Err(IoError::PayloadLength { path: path.to_string(), expected, found: payload.len() });
        }
        let data = match dtype {
            DTYPE_F32 => TensorData::F32(
                payload.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect(),
            ),
            _ => TensorData::Bool(payload.iter().map(|&b| b != 0).collect()),
        };
        Ok(Tensor { dims, data })
    }
}

fn os_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Os { path: path.display().to_string(), source }
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> IoResult<()> {
    fs::write(path, tensor.encode()).map_err(os_err(path))
}

pub fn read_tensor(path: &Path) -> IoResult<Tensor> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.display().to_string()));
    }
    let bytes = fs::read(path).map_err(os_err(path))?;
    Tensor::decode(&bytes, &path.display().to_string())
}

fn expect_f32(t: Tensor, dims: &[usize], path: &Path) -> IoResult<Vec<f32>> {
    let p = path.display().to_string();
    if t.dims != dims {
        return Err(IoError::DimMismatch { path: p, expected: dims.to_vec(), found: t.dims });
    }
    match t.data {
        TensorData::F32(v) => Ok(v),
        TensorData::Bool(_) => Err(IoError::WrongDtype { path: p, expected: DTYPE_F32, found: DTYPE_BOOL }),
    }
}

fn expect_bool(t: Tensor, dims: &[usize], path: &Path) -> IoResult<Vec<bool>> {
    let p = path.display().to_string();
    if t.dims != dims {
        return Err(IoError::DimMismatch { path: p, expected: dims.to_vec(), found: t.dims });
    }
    match t.data {
        TensorData::Bool(v) => Ok(v),
        TensorData::F32(_) => Err(IoError::WrongDtype { path: p, expected: DTYPE_BOOL, found: DTYPE_F32 }),
    }
}

fn vec3_tensor(h: usize, w: usize, data: &[Vec3]) -> Tensor {
    Tensor {
        dims: vec![h, w, 3],
        data: TensorData::F32(data.iter().flat_map(|v| [v.x as f32, v.y as f32, v.z as f32]).collect()),
    }
}

fn vec3_from(raw: &[f32]) -> Vec<Vec3> {
    raw.chunks_exact(3).map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)).collect()
}

fn mask_tensor(h: usize, w: usize, mask: &[bool]) -> Tensor {
    Tensor { dims: vec![h, w], data: TensorData::Bool(mask.to_vec()) }
}

pub fn pointmap_file(i: usize) -> String {
    format!("pointmap_{i:04}.4dk")
}
pub fn mask_file(i: usize) -> String {
    format!("mask_{i:04}.4dk")
}
pub fn flow_file(i: usize) -> String {
    format!("flow_{i:04}.4dk")
}
pub fn flow_mask_file(i: usize) -> String {
    format!("flowmask_{i:04}.4dk")
}
pub fn pose_file(i: usize) -> String {
    format!("pose_{i:04}.4dk")
}
pub fn deform_file(i: usize) -> String {
    format!("deform_{i:04}.4dk")
}
pub const INTRINSICS_FILE: &str = "intrinsics.4dk";

const ROLES: [(&str, &str); 7] = [
    ("role.pointmap", "pointmap_%04d.4dk"),
    ("role.mask", "mask_%04d.4dk"),
    ("role.flow", "flow_%04d.4dk"),
    ("role.flow_mask", "flowmask_%04d.4dk"),
    ("role.pose", "pose_%04d.4dk"),
    ("role.deformability", "deform_%04d.4dk"),
    ("role.intrinsics", INTRINSICS_FILE),
];

/// Rounds every stored quantity to `f32`, i.e. what a write/read cycle yields.
pub fn to_storage_precision(seq: &SequenceSample) -> SequenceSample {
    let q = |x: f64| x as f32 as f64;
    let qv = |v: &Vec3| v.map(q);
    let mut out = seq.clone();
    for pm in &mut out.point_maps {
        pm.data.iter_mut().for_each(|v| *v = qv(v));
    }
    for fl in &mut out.flows {
        fl.data.iter_mut().for_each(|v| *v = qv(v));
    }
    for pose in &mut out.poses {
        pose.rotation = pose.rotation.map(q);
        pose.translation = qv(&pose.translation);
    }
    let k = &mut out.intrinsics;
    (k.fx, k.fy, k.cx, k.cy) = (q(k.fx), q(k.fy), q(k.cx), q(k.cy));
    out
}

fn frame_tag_text(seq: &SequenceSample) -> IoResult<&'static str> {
    let n = seq.frames();
    let tags: Vec<FrameTag> = seq.point_maps.iter().map(|p| p.frame).chain(seq.flows.iter().map(|f| f.frame)).collect();
    let camera = seq.point_maps.iter().enumerate().all(|(i, p)| p.frame == FrameTag::Camera(i))
        && seq.flows.iter().enumerate().all(|(i, f)| f.frame == FrameTag::Camera(i));
    if camera {
        return Ok("camera");
    }
    for (text, tag) in [("world", FrameTag::World), ("world-normalized", FrameTag::WorldNormalized)] {
        if tags.iter().all(|&t| t == tag) {
            return Ok(text);
        }
    }
    Err(IoError::Unstorable(format!("mixed frame tags across {n} frames")))
}

/// Writes `seq` into directory `path`, creating it if needed.
pub fn write_sequence(seq: &SequenceSample, path: &Path) -> IoResult<()> {
    let n = seq.frames();
    let (h, w) = (seq.height(), seq.width());
    if n < 2 || seq.flows.len() + 1 != n || seq.poses.len() != n {
        return Err(IoError::Unstorable(format!(
            "{n} frames with {} flows and {} poses",
            seq.flows.len(),
            seq.poses.len()
        )));
    }
    let tag = frame_tag_text(seq)?;
    fs::create_dir_all(path).map_err(os_err(path))?;

    let mut manifest = String::new();
    let mut line = |k: &str, v: String| {
        manifest.push_str(k);
        manifest.push_str(" = ");
        manifest.push_str(&v);
        manifest.push('\n');
    };
    line("format", FORMAT_TAG.into());
    line("frames", n.to_string());
    line("height", h.to_string());
    line("width", w.to_string());
    line("frame_tag", tag.into());
    line("deformability", seq.deformability.is_some().to_string());
    match &seq.norm {
        None => line("norm", "none".into()),
        Some(p) => {
            line("norm", p.mode.to_string());
            line("norm_mu", format!("{} {} {}", p.mu.x, p.mu.y, p.mu.z));
            line("norm_scale", p.scale.to_string());
        }
    }
    line("intrinsics_size", format!("{} {}", seq.intrinsics.width, seq.intrinsics.height));
    for (k, v) in ROLES {
        line(k, v.into());
    }
    let mpath = path.join(MANIFEST);
    fs::write(&mpath, manifest).map_err(os_err(&mpath))?;

    for (i, pm) in seq.point_maps.iter().enumerate() {
        write_tensor(&path.join(pointmap_file(i)), &vec3_tensor(h, w, &pm.data))?;
        write_tensor(&path.join(mask_file(i)), &mask_tensor(h, w, &pm.mask))?;
    }
    for (i, fl) in seq.flows.iter().enumerate() {
        write_tensor(&path.join(flow_file(i)), &vec3_tensor(h, w, &fl.data))?;
        write_tensor(&path.join(flow_mask_file(i)), &mask_tensor(h, w, &fl.mask))?;
    }
    for (i, pose) in seq.poses.iter().enumerate() {
        let m = pose.to_homogeneous();
        let data = (0..4).flat_map(|r| (0..4).map(move |c| m[(r, c)] as f32)).collect();
        write_tensor(&path.join(pose_file(i)), &Tensor { dims: vec![4, 4], data: TensorData::F32(data) })?;
    }
    if let Some(dm) = &seq.deformability {
        for (i, m) in dm.iter().enumerate() {
            write_tensor(&path.join(deform_file(i)), &mask_tensor(h, w, m))?;
        }
    }
    let k = &seq.intrinsics;
    let data = vec![k.fx as f32, k.fy as f32, k.cx as f32, k.cy as f32];
    write_tensor(&path.join(INTRINSICS_FILE), &Tensor { dims: vec![4], data: TensorData::F32(data) })?;
    Ok(())
}

fn parse_manifest(text: &str) -> IoResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| IoError::Manifest(format!("line {}: expected `key = value`", no + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn field<'a>(map: &'a BTreeMap<String, String>, key: &str) -> IoResult<&'a str> {
    map.get(key).map(String::as_str).ok_or_else(|| IoError::Manifest(format!("missing key `{key}`")))
}

fn parse_num<T: std::str::FromStr>(s: &str, key: &str) -> IoResult<T> {
    s.parse().map_err(|_| IoError::Manifest(format!("bad value `{s}` for `{key}`")))
}

fn count_files(dir: &Path, prefix: &str) -> IoResult<usize> {
    let entries = fs::read_dir(dir).map_err(os_err(dir))?;
    let mut n = 0;
    for e in entries {
        let e = e.map_err(os_err(dir))?;
        let name = e.file_name();
        let name = name.to_string_lossy();
        if let Some(rest) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(".4dk")) {
            if rest.len() == 4 && rest.bytes().all(|b| b.is_ascii_digit()) {
                n += 1;
            }
        }
    }
    Ok(n)
}

/// Reads a sequence directory written by [`write_sequence`].
pub fn read_sequence(path: &Path) -> IoResult<SequenceSample> {
    if !path.is_dir() {
        return Err(IoError::MissingFile(path.display().to_string()));
    }
    let mpath = path.join(MANIFEST);
    if !mpath.exists() {
        return Err(IoError::MissingFile(mpath.display().to_string()));
    }
    let text = fs::read_to_string(&mpath).map_err(os_err(&mpath))?;
    let map = parse_manifest(&text)?;

    if field(&map, "format")? != FORMAT_TAG {
        return Err(IoError::Manifest(format!("unsupported format `{}`", field(&map, "format")?)));
    }
    for (k, v) in ROLES {
        if field(&map, k)? != v {
            return Err(IoError::Manifest(format!("unexpected file role `{k} = {}`", field(&map, k)?)));
        }
    }
    let n: usize = parse_num(field(&map, "frames")?, "frames")?;
    let h: usize = parse_num(field(&map, "height")?, "height")?;
    let w: usize = parse_num(field(&map, "width")?, "width")?;
    if n < 2 {
        return Err(IoError::Manifest(format!("frames = {n}, need at least 2")));
    }
    let tag_text = field(&map, "frame_tag")?;
    let tag_for = |i: usize| -> IoResult<FrameTag> {
        match tag_text {
            "camera" => Ok(FrameTag::Camera(i)),
            "world" => Ok(FrameTag::World),
            "world-normalized" => Ok(FrameTag::WorldNormalized),
            other => Err(IoError::Manifest(format!("unknown frame_tag `{other}`"))),
        }
    };
    let has_deform: bool = parse_num(field(&map, "deformability")?, "deformability")?;
    let norm = match field(&map, "norm")? {
        "none" => None,
        mode => {
            let mode: NormMode = mode.parse().map_err(IoError::Manifest)?;
            let mu: Vec<f64> = field(&map, "norm_mu")?
                .split_whitespace()
                .map(|s| parse_num(s, "norm_mu"))
                .collect::<IoResult<_>>()?;
            if mu.len() != 3 {
                return Err(IoError::Manifest("norm_mu needs 3 components".into()));
            }
            let scale = parse_num(field(&map, "norm_scale")?, "norm_scale")?;
            Some(NormParams { mu: Vec3::new(mu[0], mu[1], mu[2]), scale, mode })
        }
    };
    let size: Vec<usize> = field(&map, "intrinsics_size")?
        .split_whitespace()
        .map(|s| parse_num(s, "intrinsics_size"))
        .collect::<IoResult<_>>()?;
    if size.len() != 2 {
        return Err(IoError::Manifest("intrinsics_size needs width and height".into()));
    }

    let found_frames = count_files(path, "pointmap_")?;
    if found_frames != n {
        return Err(IoError::FrameCount { expected: n, found: found_frames });
    }
    let found_flows = count_files(path, "flow_")?;
    if found_flows != n - 1 {
        return Err(IoError::FlowCount { frames: n, expected: n - 1, found: found_flows });
    }

    let file = |name: String| -> PathBuf { path.join(name) };
    let mut point_maps = Vec::with_capacity(n);
    let mut poses = Vec::with_capacity(n);
    for i in 0..n {
        let p = file(pointmap_file(i));
        let data = vec3_from(&expect_f32(read_tensor(&p)?, &[h, w, 3], &p)?);
        let p = file(mask_file(i));
        let mask = expect_bool(read_tensor(&p)?, &[h, w], &p)?;
        point_maps.push(PointMap { height: h, width: w, data, mask, frame: tag_for(i)? });

        let p = file(pose_file(i));
        let m = expect_f32(read_tensor(&p)?, &[4, 4], &p)?;
        let hom = nalgebra::Matrix4::from_row_slice(&m.iter().map(|&x| x as f64).collect::<Vec<_>>());
        poses.push(CameraPose::from_homogeneous(&hom));
    }
    let mut flows = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let p = file(flow_file(i));
        let data = vec3_from(&expect_f32(read_tensor(&p)?, &[h, w, 3], &p)?);
        let p = file(flow_mask_file(i));
        let mask = expect_bool(read_tensor(&p)?, &[h, w], &p)?;
        flows.push(SceneFlow { height: h, width: w, data, mask, frame: tag_for(i)? });
    }
    let deformability = if has_deform {
        let mut masks = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let p = file(deform_file(i));
            masks.push(expect_bool(read_tensor(&p)?, &[h, w], &p)?);
        }
        Some(masks)
    } else {
        None
    };
    let p = file(INTRINSICS_FILE.to_string());
    let k = expect_f32(read_tensor(&p)?, &[4], &p)?;
    let intrinsics = CameraIntrinsics {
        fx: k[0] as f64,
        fy: k[1] as f64,
        cx: k[2] as f64,
        cy: k[3] as f64,
        width: size[0],
        height: size[1],
    };

    Ok(SequenceSample { point_maps, flows, poses, intrinsics, deformability, norm })
}
