//! Text-driven skeletal animation: joint hierarchies, keyframe clips, the
//! animation-string codec exchanged with language models, sampling and
//! forward kinematics, metaprompt assembly, the generate-and-repair loop,
//! and a small controller language for animation state transitions.

pub mod animstring;
pub mod clip;
pub mod control;
pub mod kinematics;
pub mod llm_bridge;
pub mod math;
pub mod numfmt;
pub mod promptkit;
pub mod skeleton;

pub use animstring::{parse_animstring, serialize_animstring, to_clip, AnimDocument, QuantizeSpec};
pub use clip::{normalize, validate_against, Clip, ValidationReport};
pub use kinematics::{forward_kinematics, sample, sample_series, EdgeMode};
pub use math::{Quaternion, Vec3};
pub use skeleton::{parse_object_json, serialize_object_json, Joint, Skeleton};
