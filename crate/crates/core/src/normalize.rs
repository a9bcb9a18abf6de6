//! Sequence-level normalization of world-frame geometry and motion.
//!
//! Statistics are pooled over every valid point of every frame. Points and
//! pose translations go through `x ↦ (x − mu) / scale`; flows are differences
//! and only get divided by `scale`.

use crate::error::{Error, Result};
use crate::types::{FrameTag, NormMode, NormParams, SequenceSample};
use crate::{Vec3, EPSILON};

fn require_world(seq: &SequenceSample) -> Result<()> {
    let tags = seq.point_maps.iter().map(|p| p.frame).chain(seq.flows.iter().map(|f| f.frame));
    for tag in tags {
        if tag != FrameTag::World {
            return Err(Error::FrameMismatch { expected: "world".into(), found: tag });
        }
    }
    Ok(())
}

/// Mean of the valid points, accumulated relative to the first one so that
/// large common offsets do not eat the mantissa.
fn centroid(seq: &SequenceSample) -> Option<(Vec3, usize)> {
    let mut iter = seq.valid_points();
    let anchor = *iter.next()?;
    let mut sum = Vec3::zeros();
    let mut n = 1usize;
    for p in iter {
        sum += p - anchor;
        n += 1;
    }
    Some((anchor + sum / n as f64, n))
}

/// Applies `x ↦ (x − mu) / scale` to points and translations and `v ↦ v / scale` to flows.
fn apply(seq: &SequenceSample, params: NormParams) -> SequenceSample {
    let inv = 1.0 / params.scale;
    let mut out = seq.clone();
    for pm in &mut out.point_maps {
        for (p, &m) in pm.data.iter_mut().zip(&pm.mask) {
            *p = if m { (*p - params.mu) * inv } else { Vec3::zeros() };
        }
        pm.frame = FrameTag::WorldNormalized;
    }
    for fl in &mut out.flows {
        fl.data.iter_mut().for_each(|v| *v *= inv);
        fl.frame = FrameTag::WorldNormalized;
    }
    for pose in &mut out.poses {
        pose.translation = (pose.translation - params.mu) * inv;
    }
    out.norm = Some(params);
    out
}

/// Centres on the valid-point centroid and divides by the mean centroid
/// distance plus [`EPSILON`].
pub fn canonical_normalize(seq: &SequenceSample) -> Result<(SequenceSample, NormParams)> {
    require_world(seq)?;
    let (mu, n) = centroid(seq).ok_or(Error::NoValidPixels("normalization needs at least one valid point"))?;
    let mean_dist = seq.valid_points().map(|p| (p - mu).norm()).sum::<f64>() / n as f64;
    let params = NormParams { mu, scale: mean_dist + EPSILON, mode: NormMode::Canonical };
    Ok((apply(seq, params), params))
}

/// Bounding-box normalization into `[−1, 1]`: centres on the box midpoint
/// and divides by half the largest extent plus [`EPSILON`].
pub fn max_normalize(seq: &SequenceSample) -> Result<(SequenceSample, NormParams)> {
    require_world(seq)?;
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    let mut any = false;
    for p in seq.valid_points() {
        lo = lo.inf(p);
        hi = hi.sup(p);
        any = true;
    }
    if !any {
        return Err(Error::NoValidPixels("normalization needs at least one valid point"));
    }
    let mu = (lo + hi) * 0.5;
    let half_extent = (hi - lo).max() * 0.5;
    let params = NormParams { mu, scale: half_extent + EPSILON, mode: NormMode::Max };
    Ok((apply(seq, params), params))
}

/// Undoes either normalization mode.
pub fn denormalize(seq: &SequenceSample, params: &NormParams) -> Result<SequenceSample> {
    let tags = seq.point_maps.iter().map(|p| p.frame).chain(seq.flows.iter().map(|f| f.frame));
    for tag in tags {
        if tag != FrameTag::WorldNormalized {
            return Err(Error::FrameMismatch { expected: "world-normalized".into(), found: tag });
        }
    }
    let mut out = seq.clone();
    for pm in &mut out.point_maps {
        for (p, &m) in pm.data.iter_mut().zip(&pm.mask) {
            *p = if m { *p * params.scale + params.mu } else { Vec3::zeros() };
        }
        pm.frame = FrameTag::World;
    }
    for fl in &mut out.flows {
        fl.data.iter_mut().for_each(|v| *v *= params.scale);
        fl.frame = FrameTag::World;
    }
    for pose in &mut out.poses {
        pose.translation = pose.translation * params.scale + params.mu;
    }
    out.norm = None;
    Ok(out)
}

/// Inverse of [`canonical_normalize`].
pub fn canonical_denormalize(seq: &SequenceSample, params: &NormParams) -> Result<SequenceSample> {
    if params.mode != NormMode::Canonical {
        return Err(Error::ModeMismatch { expected: "canonical", found: params.mode.to_string() });
    }
    denormalize(seq, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{CameraIntrinsics, CameraPose, PointMap, SceneFlow};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intr(h: usize, w: usize) -> CameraIntrinsics {
        CameraIntrinsics { fx: 5.0, fy: 5.0, cx: w as f64 / 2.0, cy: h as f64 / 2.0, width: w, height: h }
    }

    fn from_points(points: &[Option<Vec3>], frames: usize) -> SequenceSample {
        let w = points.len();
        let pms = (0..frames)
            .map(|_| PointMap::from_fn(1, w, FrameTag::World, |_, c| points[c]))
            .collect();
        let flows = (0..frames - 1).map(|_| SceneFlow::zeros(1, w, FrameTag::World)).collect();
        SequenceSample::new(pms, flows, vec![CameraPose::identity(); frames], intr(1, w)).unwrap()
    }

    fn random_seq(rng: &mut ChaCha8Rng) -> SequenceSample {
        let (h, w, n) = (4, 5, 3);
        let pms = (0..n)
            .map(|_| {
                PointMap::from_fn(h, w, FrameTag::World, |_, _| {
                    rng.random_bool(0.8).then(|| {
                        Vec3::new(rng.random_range(-4.0..6.0), rng.random_range(-2.0..3.0), rng.random_range(1.0..9.0))
                    })
                })
            })
            .collect();
        let flows = (0..n - 1)
            .map(|_| {
                let mut f = SceneFlow::zeros(h, w, FrameTag::World);
                f.data.iter_mut().for_each(|v| *v = Vec3::new(rng.random(), rng.random(), rng.random()));
                f
            })
            .collect();
        let poses = (0..n)
            .map(|_| CameraPose::new(crate::Mat3::identity(), Vec3::new(rng.random(), rng.random(), rng.random())))
            .collect();
        SequenceSample::new(pms, flows, poses, intr(h, w)).unwrap()
    }

    #[test]
    fn two_point_example() {
        let seq = from_points(&[Some(Vec3::new(1.0, 2.0, 3.0)), Some(Vec3::new(3.0, 2.0, 1.0))], 2);
        let (out, params) = canonical_normalize(&seq).unwrap();
        assert_eq!(params.mu, Vec3::new(2.0, 2.0, 2.0));
        assert!((params.scale - (2f64.sqrt() + EPSILON)).abs() < 1e-15);
        let h = 1.0 / 2f64.sqrt();
        assert!((out.point_maps[0].data[0] - Vec3::new(-h, 0.0, h)).amax() < 1e-7);
        assert!((out.point_maps[1].data[1] - Vec3::new(h, 0.0, -h)).amax() < 1e-7);
        assert_eq!(out.norm, Some(params));
        assert_eq!(out.point_maps[0].frame, FrameTag::WorldNormalized);
    }

    #[test]
    fn already_normalized_is_fixed_point() {
        let a = 1.0 - EPSILON;
        let seq = from_points(&[Some(Vec3::new(a, 0.0, 0.0)), Some(Vec3::new(-a, 0.0, 0.0)), None], 2);
        let (out, _) = canonical_normalize(&seq).unwrap();
        for (x, y) in out.point_maps[0].data.iter().zip(&seq.point_maps[0].data) {
            assert!((x - y).amax() < 1e-9);
        }
    }

    #[test]
    fn statistics_of_normalized_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (out, _) = canonical_normalize(&random_seq(&mut rng)).unwrap();
            let pts: Vec<Vec3> = out.valid_points().copied().collect();
            let c = pts.iter().sum::<Vec3>() / pts.len() as f64;
            let d = pts.iter().map(|p| (p - c).norm()).sum::<f64>() / pts.len() as f64;
            assert!(c.amax() < 1e-9);
            assert!((d - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn flows_scale_without_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let seq = random_seq(&mut rng);
        let (out, p) = canonical_normalize(&seq).unwrap();
        for (a, b) in out.flows[1].data.iter().zip(&seq.flows[1].data) {
            assert!((a * p.scale - b).amax() < 1e-12);
        }
        for (a, b) in out.poses.iter().zip(&seq.poses) {
            assert!((a.translation * p.scale + p.mu - b.translation).amax() < 1e-12);
        }
    }

    #[test]
    fn denormalize_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seq = random_seq(&mut rng);
        let (out, params) = canonical_normalize(&seq).unwrap();
        let back = canonical_denormalize(&out, &params).unwrap();
        for (a, b) in back.point_maps.iter().zip(&seq.point_maps) {
            assert_eq!(a.mask, b.mask);
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((x - y).amax() <= 1e-9 * y.amax().max(1.0));
            }
        }
        assert_eq!(back.norm, None);
        assert_eq!(back.point_maps[0].frame, FrameTag::World);
    }

    #[test]
    fn denormalize_arithmetic() {
        let seq = from_points(&[Some(Vec3::new(1.0, 0.0, 0.0)), Some(Vec3::new(0.0, -1.0, 0.0))], 2);
        let mut tagged = seq.clone();
        tagged.point_maps.iter_mut().for_each(|p| p.frame = FrameTag::WorldNormalized);
        tagged.flows.iter_mut().for_each(|f| f.frame = FrameTag::WorldNormalized);

        let unit = NormParams { mu: Vec3::zeros(), scale: 1.0, mode: NormMode::Canonical };
        assert_eq!(canonical_denormalize(&tagged, &unit).unwrap().point_maps[0].data, seq.point_maps[0].data);

        let p = NormParams { mu: Vec3::new(1.0, 1.0, 1.0), scale: 2.0, mode: NormMode::Canonical };
        let out = canonical_denormalize(&tagged, &p).unwrap();
        assert_eq!(out.point_maps[0].data[0], Vec3::new(3.0, 1.0, 1.0));
        assert_eq!(out.point_maps[0].data[1], Vec3::new(1.0, -1.0, 1.0));

        let max = NormParams { mode: NormMode::Max, ..p };
        assert!(matches!(canonical_denormalize(&tagged, &max), Err(Error::ModeMismatch { .. })));
    }

    #[test]
    fn max_normalize_examples() {
        let seq = from_points(&[Some(Vec3::new(-2.0, -2.0, -2.0)), Some(Vec3::new(2.0, 2.0, 2.0)), Some(Vec3::new(0.0, 1.0, -1.0))], 2);
        let (out, p) = max_normalize(&seq).unwrap();
        assert_eq!(p.mu, Vec3::zeros());
        assert!((out.point_maps[0].data[0] - Vec3::repeat(-1.0)).amax() < 1e-8);
        assert!((out.point_maps[0].data[1] - Vec3::repeat(1.0)).amax() < 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cluster: Vec<Option<Vec3>> = (0..30)
            .map(|_| Some(Vec3::repeat(10.0) + Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))))
            .collect();
        let (out, p) = max_normalize(&from_points(&cluster, 2)).unwrap();
        assert!((p.mu - Vec3::repeat(10.0)).amax() < 0.5);
        assert!(out.valid_points().all(|v| v.amax() <= 1.0));
        assert!(out.valid_points().any(|v| (v.amax() - 1.0).abs() < 1e-6));

        let same = from_points(&[Some(Vec3::new(3.0, 4.0, 5.0)); 4], 2);
        let (out, p) = max_normalize(&same).unwrap();
        assert_eq!(p.scale, EPSILON);
        assert!(out.valid_points().all(|v| *v == Vec3::zeros()));
    }

    #[test]
    fn all_invalid_and_wrong_frame_rejected() {
        let seq = from_points(&[None, None], 2);
        assert!(matches!(canonical_normalize(&seq), Err(Error::NoValidPixels(_))));
        assert!(matches!(max_normalize(&seq), Err(Error::NoValidPixels(_))));
        let mut cam = from_points(&[Some(Vec3::zeros())], 2);
        cam.point_maps[1].frame = FrameTag::Camera(1);
        assert!(matches!(canonical_normalize(&cam), Err(Error::FrameMismatch { .. })));
    }
}
