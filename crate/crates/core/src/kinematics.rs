//! Clip sampling and forward kinematics.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clip::{validate_against, Clip, RotationKey, TranslationKey};
use crate::math::{Quaternion, Vec3};
use crate::numfmt::fixed6_padded;
use crate::skeleton::Skeleton;

/// Sample times this close to a grid point or the clip end are snapped.
const GRID_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("clip does not validate against the skeleton: {}", .0.join("; "))]
    InvalidClip(Vec<String>),
    #[error("pose has no entry for joint {0:?}")]
    MissingJointInPose(String),
    #[error("sample time must be finite")]
    InvalidTime,
    #[error("frame rate must be positive and finite")]
    InvalidFps,
}

impl KinematicsError {
    pub fn code(&self) -> &'static str {
        match self {
            KinematicsError::InvalidClip(_) => "InvalidClip",
            KinematicsError::MissingJointInPose(_) => "MissingJointInPose",
            KinematicsError::InvalidTime => "InvalidTime",
            KinematicsError::InvalidFps => "InvalidFps",
        }
    }
}

/// What happens to sample times outside `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    #[default]
    Clamp,
    /// Wrap modulo the duration. Positive exact multiples of the duration
    /// map to the clip end rather than its start.
    Loop,
}

impl EdgeMode {
    pub fn map_time(self, t: f64, duration: f64) -> f64 {
        match self {
            EdgeMode::Clamp => t.clamp(0.0, duration),
            EdgeMode::Loop => {
                let r = t.rem_euclid(duration);
                if r == 0.0 && t > 0.0 {
                    duration
                } else {
                    r
                }
            }
        }
    }
}

impl FromStr for EdgeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clamp" => Ok(EdgeMode::Clamp),
            "loop" => Ok(EdgeMode::Loop),
            other => Err(format!("unknown edge mode {other:?} (expected clamp or loop)")),
        }
    }
}

impl fmt::Display for EdgeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeMode::Clamp => "clamp",
            EdgeMode::Loop => "loop",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTransform {
    pub rotation: Quaternion,
    /// Added to the joint's rest translation.
    pub translation: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldTransform {
    pub rotation: Quaternion,
    pub position: Vec3,
}

/// Local joint transforms keyed by joint name, in skeleton pre-order.
pub type Pose = IndexMap<String, LocalTransform>;

/// World joint transforms keyed by joint name, in skeleton pre-order.
pub type WorldPose = IndexMap<String, WorldTransform>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub joints: WorldPose,
}

/// Shortest-path slerp between two rotation keys evaluated at time `t`.
pub fn interpolate_rotation(a: &RotationKey, b: &RotationKey, t: f64) -> Quaternion {
    let span = b.time - a.time;
    if span <= 0.0 {
        return b.rotation;
    }
    a.rotation.slerp(b.rotation, ((t - a.time) / span).clamp(0.0, 1.0))
}

pub fn interpolate_translation(a: &TranslationKey, b: &TranslationKey, t: f64) -> Vec3 {
    let span = b.time - a.time;
    if span <= 0.0 {
        return b.translation;
    }
    a.translation.lerp(b.translation, ((t - a.time) / span).clamp(0.0, 1.0))
}

/// Rotation of a sorted, nonempty track at time `t`. Holds the first or
/// last key outside the keyed range.
pub fn sample_track(keys: &[RotationKey], t: f64) -> Quaternion {
    let i = keys.partition_point(|k| k.time <= t);
    match i {
        0 => keys[0].rotation,
        i if i == keys.len() => keys[i - 1].rotation,
        i if keys[i - 1].time == t => keys[i - 1].rotation,
        i => interpolate_rotation(&keys[i - 1], &keys[i], t),
    }
}

pub fn sample_translation_track(keys: &[TranslationKey], t: f64) -> Vec3 {
    let i = keys.partition_point(|k| k.time <= t);
    match i {
        0 => keys[0].translation,
        i if i == keys.len() => keys[i - 1].translation,
        i => interpolate_translation(&keys[i - 1], &keys[i], t),
    }
}

fn ensure_valid(c: &Clip, s: &Skeleton) -> Result<(), KinematicsError> {
    let report = validate_against(c, s);
    if report.is_valid() {
        Ok(())
    } else {
        Err(KinematicsError::InvalidClip(report.error_messages()))
    }
}

/// Local pose of `s` under clip `c` at time `t`.
pub fn sample(c: &Clip, s: &Skeleton, t: f64, edge: EdgeMode) -> Result<Pose, KinematicsError> {
    if !t.is_finite() {
        return Err(KinematicsError::InvalidTime);
    }
    ensure_valid(c, s)?;
    Ok(sample_unchecked(c, s, edge.map_time(t, c.duration)))
}

fn sample_unchecked(c: &Clip, s: &Skeleton, t: f64) -> Pose {
    let order = s.preorder();
    let mut pose = Pose::with_capacity(order.len());
    for (i, entry) in order.iter().enumerate() {
        let joint = entry.joint;
        let rotation = match c.track(&joint.name) {
            Some(track) => sample_track(&track.keys, t),
            None => joint.rest_rotation,
        };
        let mut translation = Vec3::ZERO;
        if i == 0 {
            if let Some(root) = c.root_motion.as_ref().filter(|r| !r.is_empty()) {
                translation = sample_translation_track(root, t);
            }
        }
        if let Some(extra) = c.extra_translation_tracks.iter().find(|tr| tr.joint_name == joint.name) {
            if !extra.keys.is_empty() {
                translation = translation + sample_translation_track(&extra.keys, t);
            }
        }
        pose.insert(joint.name.clone(), LocalTransform { rotation, translation });
    }
    pose
}

/// World transforms by composing local transforms from the root down.
///
/// A joint's world position is its parent's world position plus the
/// parent's world rotation applied to the joint's rest translation (plus
/// any pose translation); its world rotation is the parent's world rotation
/// times its local rotation.
pub fn forward_kinematics(s: &Skeleton, p: &Pose) -> Result<WorldPose, KinematicsError> {
    let order = s.preorder();
    let mut world: Vec<WorldTransform> = Vec::with_capacity(order.len());
    let mut out = WorldPose::with_capacity(order.len());
    for entry in &order {
        let joint = entry.joint;
        let local = p
            .get(&joint.name)
            .ok_or_else(|| KinematicsError::MissingJointInPose(joint.name.clone()))?;
        let offset = joint.rest_translation + local.translation;
        let wt = match entry.parent {
            None => WorldTransform { rotation: local.rotation, position: offset },
            Some(pi) => {
                let parent = world[pi];
                WorldTransform {
                    rotation: parent.rotation * local.rotation,
                    position: parent.position + parent.rotation.rotate(offset),
                }
            }
        };
        world.push(wt);
        out.insert(joint.name.clone(), wt);
    }
    Ok(out)
}

/// Times `0, 1/fps, 2/fps, ...` up to the duration, always ending exactly
/// at the duration.
pub fn sample_times(duration: f64, fps: f64) -> Vec<f64> {
    let steps = (duration * fps + GRID_EPSILON).floor() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 / fps).collect();
    let last = *times.last().expect("at least t = 0");
    if (duration - last).abs() <= GRID_EPSILON {
        *times.last_mut().expect("nonempty") = duration;
    } else {
        times.push(duration);
    }
    times
}

/// World poses sampled on the [`sample_times`] grid.
pub fn sample_series(c: &Clip, s: &Skeleton, fps: f64, edge: EdgeMode) -> Result<Vec<Frame>, KinematicsError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(KinematicsError::InvalidFps);
    }
    ensure_valid(c, s)?;
    sample_times(c.duration, fps)
        .into_iter()
        .map(|t| {
            let pose = sample_unchecked(c, s, edge.map_time(t, c.duration));
            Ok(Frame { t, joints: forward_kinematics(s, &pose)? })
        })
        .collect()
}

/// Weight of the incoming pose `elapsed` seconds into a crossfade lasting
/// `fade` seconds: rises linearly from 0 to 1; an instant cut is 1.
pub fn crossfade_weight(elapsed: f64, fade: f64) -> f64 {
    if fade <= 0.0 {
        return 1.0;
    }
    (elapsed / fade).clamp(0.0, 1.0)
}

/// Joint-wise blend of two local poses: slerp on rotations, lerp on
/// translations. A joint present on one side only keeps that transform.
pub fn blend_poses(from: &Pose, to: &Pose, weight: f64) -> Pose {
    let mut out = Pose::with_capacity(to.len().max(from.len()));
    for (name, b) in to {
        let blended = match from.get(name) {
            Some(a) => LocalTransform {
                rotation: a.rotation.slerp(b.rotation, weight),
                translation: a.translation.lerp(b.translation, weight),
            },
            None => *b,
        };
        out.insert(name.clone(), blended);
    }
    for (name, a) in from {
        if !out.contains_key(name) {
            out.insert(name.clone(), *a);
        }
    }
    out
}

pub const CSV_HEADER: &str = "t,joint,px,py,pz,rx,ry,rz,rw";

/// One row per joint per frame, fixed six-decimal numbers.
pub fn frames_to_csv(frames: &[Frame]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for f in frames {
        for (name, w) in &f.joints {
            let p = w.position;
            let q = w.rotation;
            let cells = [
                fixed6_padded(f.t),
                csv_field(name),
                fixed6_padded(p.x),
                fixed6_padded(p.y),
                fixed6_padded(p.z),
                fixed6_padded(q.x),
                fixed6_padded(q.y),
                fixed6_padded(q.z),
                fixed6_padded(q.w),
            ];
            out.push_str(&cells.join(","));
            out.push('\n');
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use crate::skeleton::Joint;
    use std::f64::consts::FRAC_PI_2;

    fn chain() -> Skeleton {
        Skeleton::new("c", Joint::new("a").with_child(Joint::new("b").with_translation(Vec3::new(1.0, 0.0, 0.0)))).unwrap()
    }

    fn z90() -> Quaternion {
        Quaternion::new(0.0, 0.0, 0.7071068, 0.7071068).normalized().unwrap()
    }

    #[test]
    fn key_times_are_exact() {
        let c = Clip::new("x", 1.0).with_track("a", vec![(0.0, Quaternion::IDENTITY), (1.0, z90())]);
        let p = sample(&c, &chain(), 1.0, EdgeMode::Clamp).unwrap();
        assert_eq!(p["a"].rotation, z90());
        let p = sample(&c, &chain(), 0.0, EdgeMode::Clamp).unwrap();
        assert_eq!(p["a"].rotation, Quaternion::IDENTITY);
    }

    #[test]
    fn halfway_to_quarter_turn_is_eighth_turn() {
        let c = Clip::new("x", 1.0).with_track("a", vec![(0.0, Quaternion::IDENTITY), (1.0, z90())]);
        let q = sample(&c, &chain(), 0.5, EdgeMode::Clamp).unwrap()["a"].rotation;
        let expected = [0.0, 0.0, 0.3826834, 0.9238795];
        for (a, b) in q.to_array().iter().zip(expected) {
            assert!((a - b).abs() <= 1e-6, "{q:?}");
        }
    }

    #[test]
    fn loop_wraps() {
        let c = Clip::new("x", 2.0).with_track("a", vec![(0.0, Quaternion::IDENTITY), (2.0, z90())]);
        let s = chain();
        assert_eq!(sample(&c, &s, 2.5, EdgeMode::Loop).unwrap(), sample(&c, &s, 0.5, EdgeMode::Loop).unwrap());
        assert_eq!(sample(&c, &s, 2.5, EdgeMode::Clamp).unwrap()["a"].rotation, z90());
    }

    #[test]
    fn invalid_clip_refused() {
        let c = Clip::new("x", 1.0).with_track("nope", vec![(0.0, Quaternion::IDENTITY)]);
        assert_eq!(sample(&c, &chain(), 0.0, EdgeMode::Clamp).unwrap_err().code(), "InvalidClip");
    }

    #[test]
    fn rotated_root_moves_child() {
        let mut pose = Pose::new();
        pose.insert("a".into(), LocalTransform { rotation: Quaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2), translation: Vec3::ZERO });
        pose.insert("b".into(), LocalTransform { rotation: Quaternion::IDENTITY, translation: Vec3::ZERO });
        let w = forward_kinematics(&chain(), &pose).unwrap();
        let p = w["b"].position;
        assert!(p.x.abs() < 1e-6 && (p.y - 1.0).abs() < 1e-6 && p.z.abs() < 1e-6);
    }

    #[test]
    fn missing_joint_in_pose() {
        let mut pose = Pose::new();
        pose.insert("a".into(), LocalTransform { rotation: Quaternion::IDENTITY, translation: Vec3::ZERO });
        assert_eq!(forward_kinematics(&chain(), &pose), Err(KinematicsError::MissingJointInPose("b".into())));
    }

    #[test]
    fn grid_rule() {
        assert_eq!(sample_times(1.0, 4.0), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(sample_times(1.1, 2.0), vec![0.0, 0.5, 1.0, 1.1]);
        assert_eq!(sample_times(1.0, 30.0).len(), 31);
    }

    #[test]
    fn root_motion_adds_to_rest() {
        let s = Skeleton::new("c", Joint::new("a").with_translation(Vec3::new(0.0, 1.0, 0.0))).unwrap();
        let c = Clip::new("x", 1.0).with_root_motion(vec![(0.0, Vec3::ZERO), (1.0, Vec3::new(2.0, 0.0, 0.0))]);
        let frames = sample_series(&c, &s, 2.0, EdgeMode::Clamp).unwrap();
        assert_eq!(frames[1].joints["a"].position, Vec3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn csv_layout() {
        let s = chain();
        let c = Clip::new("x", 1.0).with_track("a", vec![(0.0, Quaternion::IDENTITY)]);
        let csv = frames_to_csv(&sample_series(&c, &s, 1.0, EdgeMode::Clamp).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert_eq!(lines[2], "0.000000,b,1.000000,0.000000,0.000000,0.000000,0.000000,0.000000,1.000000");
    }

    #[test]
    fn crossfade_weight_ramps_linearly() {
        assert_eq!(crossfade_weight(0.125, 0.25), 0.5);
        assert_eq!(crossfade_weight(-1.0, 0.25), 0.0);
        assert_eq!(crossfade_weight(3.0, 0.25), 1.0);
        assert_eq!(crossfade_weight(0.0, 0.0), 1.0);
    }

    #[test]
    fn blended_pose_halfway_between_clips() {
        let z = Vec3::new(0.0, 0.0, 1.0);
        let mut a = Pose::new();
        let mut b = Pose::new();
        a.insert("j".into(), LocalTransform { rotation: Quaternion::IDENTITY, translation: Vec3::ZERO });
        b.insert("j".into(), LocalTransform { rotation: Quaternion::from_axis_angle(z, FRAC_PI_2), translation: Vec3::new(2.0, 0.0, 0.0) });
        b.insert("only_b".into(), LocalTransform { rotation: Quaternion::IDENTITY, translation: Vec3::ZERO });
        let mid = blend_poses(&a, &b, 0.5);
        assert!(mid["j"].rotation.angle_to(Quaternion::from_axis_angle(z, FRAC_PI_2 / 2.0)) < 1e-12);
        assert_eq!(mid["j"].translation, Vec3::new(1.0, 0.0, 0.0));
        assert!(mid.contains_key("only_b"));
        assert_eq!(blend_poses(&a, &b, 0.0)["j"], a["j"]);
    }
}
