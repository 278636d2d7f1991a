//! Keyframe reduction.
//!
//! One greedy pass per track in time order. A key is dropped when the
//! segment from the last kept key to the key after it reproduces every key
//! skipped so far within the tolerance: angle in radians for rotations,
//! Euclidean distance for translations. First and last keys always stay.

use crate::clip::{Clip, RotationKey, TranslationKey};
use crate::kinematics::{interpolate_rotation, interpolate_translation};

pub fn compress(c: &Clip, tolerance: f64) -> Clip {
    let tolerance = tolerance.max(0.0);
    let mut out = c.clone();
    for track in &mut out.rotation_tracks {
        track.keys = reduce(&track.keys, tolerance, |a: &RotationKey, b: &RotationKey, k: &RotationKey| {
            interpolate_rotation(a, b, k.time).angle_to(k.rotation)
        });
    }
    if let Some(root) = &mut out.root_motion {
        *root = reduce(root, tolerance, translation_deviation);
    }
    for track in &mut out.extra_translation_tracks {
        track.keys = reduce(&track.keys, tolerance, translation_deviation);
    }
    out
}

fn translation_deviation(a: &TranslationKey, b: &TranslationKey, k: &TranslationKey) -> f64 {
    (interpolate_translation(a, b, k.time) - k.translation).length()
}

fn reduce<K: Clone>(keys: &[K], tolerance: f64, deviation: impl Fn(&K, &K, &K) -> f64) -> Vec<K> {
    let n = keys.len();
    if n <= 2 {
        return keys.to_vec();
    }
    let mut kept = vec![keys[0].clone()];
    let mut anchor = 0;
    for i in 1..n - 1 {
        let right = &keys[i + 1];
        let removable = (anchor + 1..=i).all(|j| deviation(&keys[anchor], right, &keys[j]) <= tolerance);
        if !removable {
            kept.push(keys[i].clone());
            anchor = i;
        }
    }
    kept.push(keys[n - 1].clone());
    kept
}

/// Largest angle (radians) between `original`'s rotation keys and
/// `reduced` sampled at the same times, over every track of `original`.
pub fn reconstruction_error(original: &Clip, reduced: &Clip) -> f64 {
    let mut worst: f64 = 0.0;
    for track in &original.rotation_tracks {
        let Some(other) = reduced.track(&track.joint_name) else {
            continue;
        };
        for k in &track.keys {
            let q = crate::kinematics::sample_track(&other.keys, k.time);
            worst = worst.max(q.angle_to(k.rotation));
        }
    }
    worst
}
