//! Joint hierarchy of a rigged object and its object-JSON form.
//!
//! The canonical object JSON is a single compact line. A joint is written as
//! `{"name":..,"rest_translation":[x,y,z],"rest_rotation":[x,y,z,w],"children":[..]}`
//! with keys in exactly that order and numbers printed by [`numfmt::fixed6`].
//! When the object name differs from the root joint name the tree is wrapped
//! as `{"object":"..","root":{..}}`.

use std::collections::{HashMap, HashSet};

use serde_json::Value;
use thiserror::Error;

use crate::math::{Quaternion, Vec3};
use crate::numfmt::{fixed6, json_str};

/// Rest rotations with a norm in this range are silently renormalized.
pub const RENORMALIZE_RANGE: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("malformed object JSON: {0}")]
    MalformedJson(String),
    #[error("duplicate joint name {0:?}")]
    DuplicateJointName(String),
    #[error("joint {0:?} appears under more than one parent or inside its own subtree")]
    NotATree(String),
    #[error("joint {joint:?} has a degenerate rest rotation (norm {norm})")]
    DegenerateRotation { joint: String, norm: f64 },
}

impl SkeletonError {
    pub fn code(&self) -> &'static str {
        match self {
            SkeletonError::MalformedJson(_) => "MalformedJson",
            SkeletonError::DuplicateJointName(_) => "DuplicateJointName",
            SkeletonError::NotATree(_) => "NotATree",
            SkeletonError::DegenerateRotation { .. } => "DegenerateRotation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    /// Offset from the parent joint, in the parent's frame.
    pub rest_translation: Vec3,
    pub rest_rotation: Quaternion,
    pub children: Vec<Joint>,
}

impl Joint {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            rest_translation: Vec3::ZERO,
            rest_rotation: Quaternion::IDENTITY,
            children: Vec::new(),
        }
    }

    pub fn with_translation(mut self, t: Vec3) -> Self {
        self.rest_translation = t;
        self
    }

    pub fn with_rotation(mut self, q: Quaternion) -> Self {
        self.rest_rotation = q;
        self
    }

    pub fn with_child(mut self, child: Joint) -> Self {
        self.children.push(child);
        self
    }
}

/// One entry of a pre-order walk.
#[derive(Debug, Clone, Copy)]
pub struct JointRef<'a> {
    pub joint: &'a Joint,
    /// Index of the parent within the same pre-order listing.
    pub parent: Option<usize>,
    pub depth: usize,
}

/// A validated joint tree. Construct with [`Skeleton::new`] or
/// [`parse_object_json`].
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    object_name: String,
    root: Joint,
}

impl Skeleton {
    /// Validates names, rotations and numeric fields. Rest rotations within
    /// [`RENORMALIZE_RANGE`] are renormalized.
    pub fn new(object_name: impl Into<String>, mut root: Joint) -> Result<Self, SkeletonError> {
        let mut seen = HashSet::new();
        check_joint(&mut root, &mut seen)?;
        Ok(Self { object_name: object_name.into(), root })
    }

    pub fn object_name(&self) -> &str {
        &self.object_name
    }

    pub fn root(&self) -> &Joint {
        &self.root
    }

    /// Joints in depth-first pre-order, children in declaration order.
    pub fn preorder(&self) -> Vec<JointRef<'_>> {
        let mut out = Vec::new();
        let mut stack = vec![(&self.root, None, 1usize)];
        while let Some((joint, parent, depth)) = stack.pop() {
            let idx = out.len();
            out.push(JointRef { joint, parent, depth });
            for child in joint.children.iter().rev() {
                stack.push((child, Some(idx), depth + 1));
            }
        }
        out
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.preorder().into_iter().map(|j| j.joint.name.clone()).collect()
    }

    pub fn joint_count(&self) -> usize {
        self.preorder().len()
    }

    pub fn depth(&self) -> usize {
        self.preorder().iter().map(|j| j.depth).max().unwrap_or(0)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.find(name).is_some()
    }

    pub fn find(&self, name: &str) -> Option<&Joint> {
        self.preorder().into_iter().map(|j| j.joint).find(|j| j.name == name)
    }

    /// Joint name to parent name (`None` for the root).
    pub fn parent_map(&self) -> HashMap<String, Option<String>> {
        let order = self.preorder();
        order
            .iter()
            .map(|j| (j.joint.name.clone(), j.parent.map(|p| order[p].joint.name.clone())))
            .collect()
    }
}

fn check_joint(joint: &mut Joint, seen: &mut HashSet<String>) -> Result<(), SkeletonError> {
    if joint.name.trim().is_empty() {
        return Err(SkeletonError::MalformedJson("joint name must be nonempty".into()));
    }
    if !seen.insert(joint.name.clone()) {
        return Err(SkeletonError::DuplicateJointName(joint.name.clone()));
    }
    if !joint.rest_translation.is_finite() || !joint.rest_rotation.is_finite() {
        return Err(SkeletonError::MalformedJson(format!(
            "joint {:?} has non-finite rest values",
            joint.name
        )));
    }
    joint.rest_rotation = renormalize_rest(&joint.name, joint.rest_rotation)?;
    for child in &mut joint.children {
        check_joint(child, seen)?;
    }
    Ok(())
}

fn renormalize_rest(name: &str, q: Quaternion) -> Result<Quaternion, SkeletonError> {
    let norm = q.norm();
    if !(RENORMALIZE_RANGE.0..=RENORMALIZE_RANGE.1).contains(&norm) {
        return Err(SkeletonError::DegenerateRotation { joint: name.to_string(), norm });
    }
    if q.is_normalized() {
        Ok(q)
    } else {
        Ok(q.scale(1.0 / norm))
    }
}

/// Parses object JSON into a [`Skeleton`].
///
/// Accepts either a bare root joint (object name = root name) or a wrapper
/// `{"object": name, "root": joint}`. Missing `rest_translation` defaults to
/// zero, missing `rest_rotation` to identity, missing `children` to none.
///
/// A joint name that reappears under a different parent, or inside its own
/// subtree, is reported as [`SkeletonError::NotATree`]; a name repeated among
/// siblings is [`SkeletonError::DuplicateJointName`].
pub fn parse_object_json(text: &str) -> Result<Skeleton, SkeletonError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| SkeletonError::MalformedJson(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| SkeletonError::MalformedJson("top level must be an object".into()))?;

    let (object_name, root_value) = match obj.get("root") {
        Some(root) if !obj.contains_key("name") => {
            let root_name = root.get("name").and_then(Value::as_str).unwrap_or_default();
            let name = match obj.get("object") {
                Some(Value::String(s)) => s.clone(),
                Some(_) => return Err(SkeletonError::MalformedJson("\"object\" must be a string".into())),
                None => root_name.to_string(),
            };
            (name, root)
        }
        _ => {
            let name = obj.get("name").and_then(Value::as_str).unwrap_or_default().to_string();
            (name, &value)
        }
    };

    let mut walker = TreeWalker::default();
    let root = walker.joint(root_value, None)?;
    Skeleton::new(object_name, root)
}

#[derive(Default)]
struct TreeWalker {
    /// Joint name to the name of its parent (empty for the root).
    parents: HashMap<String, String>,
    ancestors: Vec<String>,
}

impl TreeWalker {
    fn joint(&mut self, v: &Value, parent: Option<&str>) -> Result<Joint, SkeletonError> {
        let obj = v
            .as_object()
            .ok_or_else(|| SkeletonError::MalformedJson("joint must be an object".into()))?;
        let name = match obj.get("name") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            _ => return Err(SkeletonError::MalformedJson("joint requires a nonempty \"name\"".into())),
        };

        if self.ancestors.contains(&name) {
            return Err(SkeletonError::NotATree(name));
        }
        let parent_name = parent.unwrap_or_default().to_string();
        if let Some(prev) = self.parents.get(&name) {
            return Err(if *prev == parent_name {
                SkeletonError::DuplicateJointName(name)
            } else {
                SkeletonError::NotATree(name)
            });
        }
        self.parents.insert(name.clone(), parent_name);

        let rest_translation = match obj.get("rest_translation") {
            None | Some(Value::Null) => Vec3::ZERO,
            Some(v) => Vec3::from(numbers::<3>(v, &name, "rest_translation")?),
        };
        let rest_rotation = match obj.get("rest_rotation") {
            None | Some(Value::Null) => Quaternion::IDENTITY,
            Some(v) => Quaternion::from(numbers::<4>(v, &name, "rest_rotation")?),
        };

        let mut children = Vec::new();
        match obj.get("children") {
            None | Some(Value::Null) => {}
            Some(Value::Array(items)) => {
                self.ancestors.push(name.clone());
                for item in items {
                    children.push(self.joint(item, Some(&name))?);
                }
                self.ancestors.pop();
            }
            Some(_) => {
                return Err(SkeletonError::MalformedJson(format!(
                    "joint {name:?}: \"children\" must be an array"
                )))
            }
        }

        Ok(Joint { name, rest_translation, rest_rotation, children })
    }
}

fn numbers<const N: usize>(v: &Value, joint: &str, field: &str) -> Result<[f64; N], SkeletonError> {
    let bad = || SkeletonError::MalformedJson(format!("joint {joint:?}: {field} must be {N} numbers"));
    let arr = v.as_array().ok_or_else(bad)?;
    if arr.len() != N {
        return Err(bad());
    }
    let mut out = [0.0; N];
    for (slot, item) in out.iter_mut().zip(arr) {
        *slot = item.as_f64().ok_or_else(bad)?;
    }
    Ok(out)
}

/// Canonical single-line object JSON.
pub fn serialize_object_json(s: &Skeleton) -> String {
    let mut out = String::new();
    if s.object_name != s.root.name {
        out.push_str("{\"object\":");
        out.push_str(&json_str(&s.object_name));
        out.push_str(",\"root\":");
        write_joint(&mut out, &s.root);
        out.push('}');
    } else {
        write_joint(&mut out, &s.root);
    }
    out
}

fn write_joint(out: &mut String, j: &Joint) {
    let t = j.rest_translation;
    let q = j.rest_rotation;
    out.push_str("{\"name\":");
    out.push_str(&json_str(&j.name));
    out.push_str(&format!(
        ",\"rest_translation\":[{},{},{}],\"rest_rotation\":[{},{},{},{}],\"children\":[",
        fixed6(t.x),
        fixed6(t.y),
        fixed6(t.z),
        fixed6(q.x),
        fixed6(q.y),
        fixed6(q.z),
        fixed6(q.w)
    ));
    for (i, c) in j.children.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_joint(out, c);
    }
    out.push_str("]}");
}

/// Pretty-printed variant for prompts and humans; same content as the
/// canonical form.
pub fn object_json_value(s: &Skeleton) -> Value {
    serde_json::from_str(&serialize_object_json(s)).expect("canonical JSON is valid")
}
