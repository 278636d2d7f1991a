//! In-memory animation clips and their validation against a skeleton.
//!
//! Rotation tracks hold absolute local rotations that replace the joint's
//! rest rotation while the clip plays. The root track holds translations
//! added to the root's rest translation. Joints without a track keep their
//! rest pose.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::math::{Quaternion, Vec3};
use crate::numfmt::{fixed6, json_str};
use crate::skeleton::Skeleton;

/// Quaternions with a norm below this cannot be repaired by normalization.
pub const MIN_REPAIRABLE_NORM: f64 = 0.1;

/// Consecutive keys further apart than this (radians) get an orientation
/// warning: at 1-digit precision the intended direction is easy to misread.
pub const LARGE_STEP_ANGLE: f64 = std::f64::consts::FRAC_PI_2;

/// Tracks whose keys all lie within this angle (radians) carry no motion.
pub const STATIC_TRACK_ANGLE: f64 = 1e-6;

/// Normalized quaternions are left untouched by [`normalize`] when their norm
/// is this close to one, which keeps the operation idempotent bit-for-bit.
const RENORM_SKIP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClipError {
    #[error("joint {joint:?} key at t={time} has a degenerate rotation (norm {norm})")]
    DegenerateRotation { joint: String, time: f64, norm: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("clip duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("malformed clip JSON: {0}")]
    MalformedJson(String),
}

impl ClipError {
    pub fn code(&self) -> &'static str {
        match self {
            ClipError::DegenerateRotation { .. } => "DegenerateRotation",
            ClipError::NonFinite(_) => "NonFinite",
            ClipError::InvalidDuration(_) => "InvalidDuration",
            ClipError::MalformedJson(_) => "MalformedJson",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationKey {
    pub time: f64,
    pub rotation: Quaternion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationKey {
    pub time: f64,
    pub translation: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationTrack {
    pub joint_name: String,
    pub keys: Vec<RotationKey>,
}

/// Per-joint translation offsets. Only used when a clip opts into joint
/// translation; ordinary clips animate rotations and root motion only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationTrack {
    pub joint_name: String,
    pub keys: Vec<TranslationKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub name: String,
    pub duration: f64,
    pub rotation_tracks: Vec<RotationTrack>,
    pub root_motion: Option<Vec<TranslationKey>>,
    #[serde(default)]
    pub extra_translation_tracks: Vec<TranslationTrack>,
}

impl Clip {
    pub fn new(name: impl Into<String>, duration: f64) -> Self {
        Self {
            name: name.into(),
            duration,
            rotation_tracks: Vec::new(),
            root_motion: None,
            extra_translation_tracks: Vec::new(),
        }
    }

    pub fn with_track(mut self, joint: impl Into<String>, keys: Vec<(f64, Quaternion)>) -> Self {
        self.rotation_tracks.push(RotationTrack {
            joint_name: joint.into(),
            keys: keys.into_iter().map(|(time, rotation)| RotationKey { time, rotation }).collect(),
        });
        self
    }

    pub fn with_root_motion(mut self, keys: Vec<(f64, Vec3)>) -> Self {
        self.root_motion = Some(
            keys.into_iter()
                .map(|(time, translation)| TranslationKey { time, translation })
                .collect(),
        );
        self
    }

    pub fn track(&self, joint: &str) -> Option<&RotationTrack> {
        self.rotation_tracks.iter().find(|t| t.joint_name == joint)
    }

    pub fn key_count(&self) -> usize {
        self.rotation_tracks.iter().map(|t| t.keys.len()).sum::<usize>()
            + self.root_motion.as_ref().map_or(0, Vec::len)
            + self.extra_translation_tracks.iter().map(|t| t.keys.len()).sum::<usize>()
    }

    /// Latest key time over every track, or 0 for a clip with no keys.
    pub fn max_key_time(&self) -> f64 {
        let rot = self.rotation_tracks.iter().flat_map(|t| t.keys.iter().map(|k| k.time));
        let root = self.root_motion.iter().flatten().map(|k| k.time);
        let extra = self.extra_translation_tracks.iter().flat_map(|t| t.keys.iter().map(|k| k.time));
        rot.chain(root).chain(extra).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Finding {
    UnknownJoint { joint: String },
    DuplicateTrack { joint: String },
    EmptyTrack { joint: String },
    UntrackedJoint { joint: String },
    OutOfRangeTime { joint: String, time: f64 },
    NonMonotoneTime { joint: String, index: usize },
    NonFiniteValue { joint: String, index: usize },
    DenormalizedRotation { joint: String, time: f64, norm: f64 },
    InvalidDuration { duration: f64 },
    /// Two consecutive keys more than a quarter turn apart; the
    /// direction of rotation may not be what was intended.
    OrientationAmbiguity { joint: String, time: f64, angle: f64 },
}

impl Finding {
    pub fn severity(&self) -> Severity {
        match self {
            Finding::UntrackedJoint { .. } => Severity::Info,
            Finding::OrientationAmbiguity { .. } => Severity::Warning,
            _ => Severity::Error,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Finding::UnknownJoint { joint } => format!("unknown joint {joint:?}: not in the object hierarchy"),
            Finding::DuplicateTrack { joint } => format!("joint {joint:?} has more than one track"),
            Finding::EmptyTrack { joint } => format!("track for {joint:?} has no keys"),
            Finding::UntrackedJoint { joint } => format!("joint {joint:?} is not animated"),
            Finding::OutOfRangeTime { joint, time } => {
                format!("key time {time} on {joint:?} lies outside [0, duration]")
            }
            Finding::NonMonotoneTime { joint, index } => {
                format!("key {index} on {joint:?} is not strictly after the previous key")
            }
            Finding::NonFiniteValue { joint, index } => format!("key {index} on {joint:?} has a non-finite value"),
            Finding::DenormalizedRotation { joint, time, norm } => {
                format!("rotation on {joint:?} at t={time} is not unit length (norm {norm})")
            }
            Finding::InvalidDuration { duration } => format!("duration {duration} must be positive"),
            Finding::OrientationAmbiguity { joint, time, angle } => format!(
                "joint {joint:?} turns {angle:.3} rad between keys ending at t={time}; check the direction"
            ),
        }
    }
}

pub const ROOT_TRACK_LABEL: &str = "ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    /// Skeleton joints that have a rotation track, in skeleton order.
    pub covered_joints: Vec<String>,
    /// Skeleton joints whose rotation track actually moves.
    pub motion_joints: Vec<String>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity() == Severity::Error)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn is_valid(&self) -> bool {
        self.error_count() == 0
    }

    pub fn error_messages(&self) -> Vec<String> {
        self.errors().map(Finding::describe).collect()
    }

    /// One line per finding, prefixed with its severity.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for f in &self.findings {
            let tag = match f.severity() {
                Severity::Error => "error",
                Severity::Warning => "warning",
                Severity::Info => "info",
            };
            out.push_str(&format!("{tag}: {}\n", f.describe()));
        }
        let moving = if self.motion_joints.is_empty() { "(none)".to_string() } else { self.motion_joints.join(", ") };
        out.push_str(&format!("animated joints: {moving}\n"));
        out.push_str(if self.is_valid() { "valid\n" } else { "invalid\n" });
        out
    }
}

pub fn validate_against(c: &Clip, s: &Skeleton) -> ValidationReport {
    let mut findings = Vec::new();
    if !(c.duration.is_finite() && c.duration > 0.0) {
        findings.push(Finding::InvalidDuration { duration: c.duration });
    }

    let mut seen = BTreeSet::new();
    for track in &c.rotation_tracks {
        let joint = &track.joint_name;
        if !s.contains(joint) {
            findings.push(Finding::UnknownJoint { joint: joint.clone() });
        }
        if !seen.insert(joint.as_str()) {
            findings.push(Finding::DuplicateTrack { joint: joint.clone() });
        }
        if track.keys.is_empty() {
            findings.push(Finding::EmptyTrack { joint: joint.clone() });
        }
        let times: Vec<f64> = track.keys.iter().map(|k| k.time).collect();
        check_times(joint, &times, c.duration, &mut findings);
        for (i, k) in track.keys.iter().enumerate() {
            if !k.rotation.is_finite() {
                findings.push(Finding::NonFiniteValue { joint: joint.clone(), index: i });
            } else if !k.rotation.is_normalized() {
                findings.push(Finding::DenormalizedRotation {
                    joint: joint.clone(),
                    time: k.time,
                    norm: k.rotation.norm(),
                });
            }
        }
        for pair in track.keys.windows(2) {
            let angle = pair[0].rotation.angle_to(pair[1].rotation);
            if angle > LARGE_STEP_ANGLE {
                findings.push(Finding::OrientationAmbiguity { joint: joint.clone(), time: pair[1].time, angle });
            }
        }
    }

    if let Some(root) = &c.root_motion {
        let times: Vec<f64> = root.iter().map(|k| k.time).collect();
        check_times(ROOT_TRACK_LABEL, &times, c.duration, &mut findings);
        for (i, k) in root.iter().enumerate() {
            if !k.translation.is_finite() {
                findings.push(Finding::NonFiniteValue { joint: ROOT_TRACK_LABEL.into(), index: i });
            }
        }
    }

    let mut extra_seen = BTreeSet::new();
    for track in &c.extra_translation_tracks {
        let joint = &track.joint_name;
        if !s.contains(joint) {
            findings.push(Finding::UnknownJoint { joint: joint.clone() });
        }
        if !extra_seen.insert(joint.as_str()) {
            findings.push(Finding::DuplicateTrack { joint: joint.clone() });
        }
        if track.keys.is_empty() {
            findings.push(Finding::EmptyTrack { joint: joint.clone() });
        }
        let times: Vec<f64> = track.keys.iter().map(|k| k.time).collect();
        check_times(joint, &times, c.duration, &mut findings);
    }

    let mut covered_joints = Vec::new();
    let mut motion_joints = Vec::new();
    for name in s.joint_names() {
        match c.track(&name) {
            Some(track) => {
                if track_moves(track) {
                    motion_joints.push(name.clone());
                }
                covered_joints.push(name);
            }
            None => findings.push(Finding::UntrackedJoint { joint: name }),
        }
    }

    ValidationReport { findings, covered_joints, motion_joints }
}

fn track_moves(track: &RotationTrack) -> bool {
    match track.keys.first() {
        Some(first) => track.keys.iter().any(|k| first.rotation.angle_to(k.rotation) > STATIC_TRACK_ANGLE),
        None => false,
    }
}

fn check_times(joint: &str, times: &[f64], duration: f64, findings: &mut Vec<Finding>) {
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() {
            findings.push(Finding::NonFiniteValue { joint: joint.to_string(), index: i });
            continue;
        }
        if t < 0.0 || t > duration {
            findings.push(Finding::OutOfRangeTime { joint: joint.to_string(), time: t });
        }
        if i > 0 && times[i - 1].is_finite() && t <= times[i - 1] {
            findings.push(Finding::NonMonotoneTime { joint: joint.to_string(), index: i });
        }
    }
}

/// Repairs the common defects of generated clips.
///
/// Rotations are renormalized, keys sorted by time, keys sharing a
/// timestamp collapsed to the last one given, and each rotation track made
/// sign-continuous (a key is negated when its dot product with the previous
/// key is negative). The result is a fixed point: `normalize(normalize(c))`
/// equals `normalize(c)` exactly.
pub fn normalize(c: &Clip) -> Result<Clip, ClipError> {
    if !c.duration.is_finite() {
        return Err(ClipError::NonFinite("duration".into()));
    }
    let mut out = c.clone();

    for track in &mut out.rotation_tracks {
        for k in &mut track.keys {
            if !k.time.is_finite() || !k.rotation.is_finite() {
                return Err(ClipError::NonFinite(format!("track {:?}", track.joint_name)));
            }
            let norm = k.rotation.norm();
            if norm < MIN_REPAIRABLE_NORM {
                return Err(ClipError::DegenerateRotation {
                    joint: track.joint_name.clone(),
                    time: k.time,
                    norm,
                });
            }
            if (norm - 1.0).abs() > RENORM_SKIP {
                k.rotation = k.rotation.scale(1.0 / norm);
            }
        }
        track.keys = sort_dedup(std::mem::take(&mut track.keys), |k| k.time);
        for i in 1..track.keys.len() {
            if track.keys[i - 1].rotation.dot(track.keys[i].rotation) < 0.0 {
                track.keys[i].rotation = -track.keys[i].rotation;
            }
        }
    }

    if let Some(root) = out.root_motion.take() {
        for k in &root {
            if !k.time.is_finite() || !k.translation.is_finite() {
                return Err(ClipError::NonFinite(ROOT_TRACK_LABEL.into()));
            }
        }
        let root = sort_dedup(root, |k| k.time);
        out.root_motion = if root.is_empty() { None } else { Some(root) };
    }

    for track in &mut out.extra_translation_tracks {
        for k in &track.keys {
            if !k.time.is_finite() || !k.translation.is_finite() {
                return Err(ClipError::NonFinite(format!("translation track {:?}", track.joint_name)));
            }
        }
        track.keys = sort_dedup(std::mem::take(&mut track.keys), |k| k.time);
    }

    Ok(out)
}

/// Stable sort by time, then keep the last key of each run of equal times.
fn sort_dedup<K>(mut keys: Vec<K>, time: impl Fn(&K) -> f64) -> Vec<K> {
    keys.sort_by(|a, b| time(a).total_cmp(&time(b)));
    let mut out: Vec<K> = Vec::with_capacity(keys.len());
    for k in keys {
        if let Some(last) = out.last_mut() {
            if time(last) == time(&k) {
                *last = k;
                continue;
            }
        }
        out.push(k);
    }
    out
}

/// Canonical clip JSON on a single line:
/// `{"name":..,"duration":..,"tracks":[{"joint":..,"keys":[[t,x,y,z,w],..]}],"root":[[t,x,y,z],..]}`.
/// Per-joint translation tracks, when present, follow as
/// `"translations":[{"joint":..,"keys":[[t,x,y,z],..]}]`.
pub fn serialize_clip_json(c: &Clip) -> String {
    let mut out = format!("{{\"name\":{},\"duration\":{},\"tracks\":[", json_str(&c.name), fixed6(c.duration));
    for (i, track) in c.rotation_tracks.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{{\"joint\":{},\"keys\":[", json_str(&track.joint_name)));
        let keys: Vec<String> = track
            .keys
            .iter()
            .map(|k| {
                let q = k.rotation;
                format!("[{},{},{},{},{}]", fixed6(k.time), fixed6(q.x), fixed6(q.y), fixed6(q.z), fixed6(q.w))
            })
            .collect();
        out.push_str(&keys.join(","));
        out.push_str("]}");
    }
    out.push_str("],\"root\":[");
    if let Some(root) = &c.root_motion {
        out.push_str(&translation_keys(root).join(","));
    }
    out.push(']');
    if !c.extra_translation_tracks.is_empty() {
        out.push_str(",\"translations\":[");
        let tracks: Vec<String> = c
            .extra_translation_tracks
            .iter()
            .map(|t| format!("{{\"joint\":{},\"keys\":[{}]}}", json_str(&t.joint_name), translation_keys(&t.keys).join(",")))
            .collect();
        out.push_str(&tracks.join(","));
        out.push(']');
    }
    out.push('}');
    out
}

fn translation_keys(keys: &[TranslationKey]) -> Vec<String> {
    keys.iter()
        .map(|k| {
            let p = k.translation;
            format!("[{},{},{},{}]", fixed6(k.time), fixed6(p.x), fixed6(p.y), fixed6(p.z))
        })
        .collect()
}

pub fn parse_clip_json(text: &str) -> Result<Clip, ClipError> {
    let bad = |m: &str| ClipError::MalformedJson(m.to_string());
    let v: Value = serde_json::from_str(text).map_err(|e| ClipError::MalformedJson(e.to_string()))?;
    let name = v.get("name").and_then(Value::as_str).ok_or_else(|| bad("missing \"name\""))?;
    let duration = v.get("duration").and_then(Value::as_f64).ok_or_else(|| bad("missing \"duration\""))?;
    let mut clip = Clip::new(name, duration);

    for track in v.get("tracks").and_then(Value::as_array).ok_or_else(|| bad("missing \"tracks\""))? {
        let joint = track.get("joint").and_then(Value::as_str).ok_or_else(|| bad("track missing \"joint\""))?;
        let keys = rows::<5>(track.get("keys"))?
            .into_iter()
            .map(|r| RotationKey { time: r[0], rotation: Quaternion::new(r[1], r[2], r[3], r[4]) })
            .collect();
        clip.rotation_tracks.push(RotationTrack { joint_name: joint.to_string(), keys });
    }

    let root = match v.get("root") {
        None | Some(Value::Null) => Vec::new(),
        some => rows::<4>(some)?.into_iter().map(translation_row).collect(),
    };
    clip.root_motion = if root.is_empty() { None } else { Some(root) };

    if let Some(tracks) = v.get("translations").and_then(Value::as_array) {
        for track in tracks {
            let joint = track.get("joint").and_then(Value::as_str).ok_or_else(|| bad("track missing \"joint\""))?;
            let keys = rows::<4>(track.get("keys"))?.into_iter().map(translation_row).collect();
            clip.extra_translation_tracks.push(TranslationTrack { joint_name: joint.to_string(), keys });
        }
    }
    Ok(clip)
}

fn translation_row(r: [f64; 4]) -> TranslationKey {
    TranslationKey { time: r[0], translation: Vec3::new(r[1], r[2], r[3]) }
}

fn rows<const N: usize>(v: Option<&Value>) -> Result<Vec<[f64; N]>, ClipError> {
    let bad = || ClipError::MalformedJson(format!("keys must be arrays of {N} numbers"));
    let arr = v.and_then(Value::as_array).ok_or_else(bad)?;
    arr.iter()
        .map(|row| {
            let row = row.as_array().filter(|r| r.len() == N).ok_or_else(bad)?;
            let mut out = [0.0; N];
            for (slot, x) in out.iter_mut().zip(row) {
                *slot = x.as_f64().ok_or_else(bad)?;
            }
            Ok(out)
        })
        .collect()
}
