//! The textual animation string exchanged with language models (grammar v1).
//!
//! ```text
//! ANIMATION <name>
//! DURATION <seconds>            (optional)
//! JOINT <joint name>
//! (q0, q1, q2, q3, t)           one or more, quaternion (x, y, z, w) then time
//! ROOT
//! (x, y, z, t)                  root translation then time
//! END
//! ```
//!
//! The parser also accepts surrounding markdown code fences, blank lines,
//! trailing commas, lowercase keywords and arbitrary horizontal whitespace.

mod compress;
mod quantize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clip::{self, Clip, ClipError, RotationKey, RotationTrack, TranslationKey};
use crate::math::{Quaternion, Vec3};

pub use compress::{compress, reconstruction_error};
pub use quantize::{QuantizeMode, QuantizeSpec, Rounding};

pub const GRAMMAR_VERSION: &str = "v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnimStringError {
    #[error("syntax error at line {line}, column {column}: expected {expected}")]
    Syntax { line: usize, column: usize, expected: String },
    #[error("wrong number of values in a tuple of section {section} at line {line}")]
    Arity { section: String, line: usize },
    #[error("empty animation document")]
    EmptyDocument,
}

impl AnimStringError {
    pub fn code(&self) -> &'static str {
        match self {
            AnimStringError::Syntax { .. } => "SyntaxError",
            AnimStringError::Arity { .. } => "ArityError",
            AnimStringError::EmptyDocument => "EmptyDocument",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Section {
    /// Tuples are `[x, y, z, w, t]` as written.
    Joint { name: String, line: usize, tuples: Vec<[f64; 5]> },
    /// Tuples are `[x, y, z, t]` as written.
    Root { line: usize, tuples: Vec<[f64; 4]> },
}

impl Section {
    pub fn label(&self) -> &str {
        match self {
            Section::Joint { name, .. } => name,
            Section::Root { .. } => "ROOT",
        }
    }

    pub fn tuple_count(&self) -> usize {
        match self {
            Section::Joint { tuples, .. } => tuples.len(),
            Section::Root { tuples, .. } => tuples.len(),
        }
    }
}

/// Parsed animation string with numbers exactly as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimDocument {
    pub name: String,
    pub duration: Option<f64>,
    pub sections: Vec<Section>,
}

impl AnimDocument {
    /// Document holding every rotation track and the root track of `c`.
    pub fn from_clip(c: &Clip) -> Self {
        let mut sections: Vec<Section> = c
            .rotation_tracks
            .iter()
            .map(|t| Section::Joint {
                name: t.joint_name.clone(),
                line: 0,
                tuples: t
                    .keys
                    .iter()
                    .map(|k| {
                        let q = k.rotation;
                        [q.x, q.y, q.z, q.w, k.time]
                    })
                    .collect(),
            })
            .collect();
        if let Some(root) = c.root_motion.as_ref().filter(|r| !r.is_empty()) {
            sections.push(Section::Root {
                line: 0,
                tuples: root
                    .iter()
                    .map(|k| {
                        let p = k.translation;
                        [p.x, p.y, p.z, k.time]
                    })
                    .collect(),
            });
        }
        Self { name: c.name.clone(), duration: Some(c.duration), sections }
    }

    /// Canonical text with every number formatted by `q`.
    pub fn render(&self, q: &QuantizeSpec) -> String {
        let mut out = format!("ANIMATION {}\n", single_line(&self.name));
        if let Some(d) = self.duration {
            out.push_str(&format!("DURATION {}\n", q.format(d)));
        }
        for section in &self.sections {
            match section {
                Section::Joint { name, tuples, .. } => {
                    out.push_str(&format!("JOINT {}\n", single_line(name)));
                    for t in tuples {
                        out.push_str(&tuple_line(t, q));
                    }
                }
                Section::Root { tuples, .. } => {
                    out.push_str("ROOT\n");
                    for t in tuples {
                        out.push_str(&tuple_line(t, q));
                    }
                }
            }
        }
        out.push_str("END\n");
        out
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tuple_line(values: &[f64], q: &QuantizeSpec) -> String {
    let parts: Vec<String> = values.iter().map(|v| q.format(*v)).collect();
    format!("({})\n", parts.join(", "))
}

/// Parses grammar v1 text. Numbers are kept exactly as written.
pub fn parse_animstring(text: &str) -> Result<AnimDocument, AnimStringError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with("```")
        })
        .collect();
    if lines.is_empty() {
        return Err(AnimStringError::EmptyDocument);
    }

    let mut iter = lines.into_iter().peekable();
    let (line_no, line) = iter.next().expect("nonempty");
    let name = match keyword(line) {
        Some((Keyword::Animation, rest, col)) => {
            if rest.is_empty() {
                return Err(syntax(line_no, col, "animation name"));
            }
            rest.to_string()
        }
        _ => return Err(syntax(line_no, first_col(line), "ANIMATION")),
    };

    let mut duration = None;
    if let Some(&(line_no, line)) = iter.peek() {
        if let Some((Keyword::Duration, rest, col)) = keyword(line) {
            iter.next();
            duration = Some(parse_lone_number(rest, line_no, col)?);
        }
    }

    let mut sections = Vec::new();
    let mut ended = false;
    while let Some((line_no, line)) = iter.next() {
        let mut section = match keyword(line) {
            Some((Keyword::Joint, rest, col)) => {
                if rest.is_empty() {
                    return Err(syntax(line_no, col, "joint name"));
                }
                Section::Joint { name: rest.to_string(), line: line_no, tuples: Vec::new() }
            }
            Some((Keyword::Root, rest, col)) => {
                if !rest.is_empty() {
                    return Err(syntax(line_no, col, "end of line after ROOT"));
                }
                Section::Root { line: line_no, tuples: Vec::new() }
            }
            Some((Keyword::End, rest, col)) if !sections.is_empty() => {
                if !rest.is_empty() {
                    return Err(syntax(line_no, col, "end of line after END"));
                }
                ended = true;
                break;
            }
            _ => {
                let expected = if sections.is_empty() { "JOINT or ROOT" } else { "JOINT, ROOT or END" };
                return Err(syntax(line_no, first_col(line), expected));
            }
        };

        while let Some(&(tuple_line_no, tuple_text)) = iter.peek() {
            if !tuple_text.trim_start().starts_with('(') {
                break;
            }
            iter.next();
            let values = parse_tuple(tuple_text, tuple_line_no)?;
            let label = section.label().to_string();
            let arity_error = || AnimStringError::Arity { section: label.clone(), line: tuple_line_no };
            match &mut section {
                Section::Joint { tuples, .. } => tuples.push(values.try_into().map_err(|_| arity_error())?),
                Section::Root { tuples, .. } => tuples.push(values.try_into().map_err(|_| arity_error())?),
            }
        }
        if section.tuple_count() == 0 {
            let (l, c) = match iter.peek() {
                Some(&(l, t)) => (l, first_col(t)),
                None => (line_no + 1, 1),
            };
            return Err(syntax(l, c, "tuple"));
        }
        sections.push(section);
    }

    if !ended {
        let last_line = text.lines().count() + 1;
        return Err(syntax(last_line, 1, "END"));
    }
    if let Some((line_no, line)) = iter.next() {
        return Err(syntax(line_no, first_col(line), "end of document"));
    }

    Ok(AnimDocument { name, duration, sections })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Keyword {
    Animation,
    Duration,
    Joint,
    Root,
    End,
}

/// Splits a line into its leading keyword and the trimmed remainder, with
/// the 1-based column where the remainder starts.
fn keyword(line: &str) -> Option<(Keyword, &str, usize)> {
    let trimmed = line.trim_start();
    let indent = line.len() - trimmed.len();
    let word_len = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
    let (word, rest) = trimmed.split_at(word_len);
    let kw = match word.to_ascii_uppercase().as_str() {
        "ANIMATION" => Keyword::Animation,
        "DURATION" => Keyword::Duration,
        "JOINT" => Keyword::Joint,
        "ROOT" => Keyword::Root,
        "END" => Keyword::End,
        _ => return None,
    };
    let rest_trimmed = rest.trim_start();
    let offset = indent + word_len + (rest.len() - rest_trimmed.len());
    Some((kw, rest_trimmed.trim_end(), char_col(line, offset)))
}

fn first_col(line: &str) -> usize {
    char_col(line, line.len() - line.trim_start().len())
}

fn char_col(line: &str, byte_offset: usize) -> usize {
    line[..byte_offset].chars().count() + 1
}

fn syntax(line: usize, column: usize, expected: &str) -> AnimStringError {
    AnimStringError::Syntax { line, column, expected: expected.to_string() }
}

fn parse_lone_number(text: &str, line: usize, col: usize) -> Result<f64, AnimStringError> {
    let text = text.trim_end_matches(',').trim_end();
    parse_number(text).ok_or_else(|| syntax(line, col, "number"))
}

fn parse_number(token: &str) -> Option<f64> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E')) {
        return None;
    }
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses `( n, n, ... )` with an optional trailing comma inside the
/// parentheses and after the closing one.
fn parse_tuple(line: &str, line_no: usize) -> Result<Vec<f64>, AnimStringError> {
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let col = |i: usize| i + 1;
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while *i < chars.len() && chars[*i].1.is_whitespace() {
            *i += 1;
        }
    };

    skip_ws(&mut i);
    if i >= chars.len() || chars[i].1 != '(' {
        return Err(syntax(line_no, col(i), "'('"));
    }
    i += 1;

    let mut values = Vec::new();
    loop {
        skip_ws(&mut i);
        if i < chars.len() && chars[i].1 == ')' {
            if values.is_empty() {
                return Err(syntax(line_no, col(i), "number"));
            }
            i += 1;
            break;
        }
        let start = i;
        while i < chars.len() && !chars[i].1.is_whitespace() && !matches!(chars[i].1, ',' | ')' | '(') {
            i += 1;
        }
        let token: String = chars[start..i].iter().map(|(_, c)| c).collect();
        let v = parse_number(&token).ok_or_else(|| syntax(line_no, col(start), "number"))?;
        values.push(v);
        skip_ws(&mut i);
        match chars.get(i).map(|(_, c)| *c) {
            Some(',') => i += 1,
            Some(')') => {}
            _ => return Err(syntax(line_no, col(i), "',' or ')'")),
        }
    }

    skip_ws(&mut i);
    if i < chars.len() && chars[i].1 == ',' {
        i += 1;
        skip_ws(&mut i);
    }
    if i < chars.len() {
        return Err(syntax(line_no, col(i), "end of line"));
    }
    Ok(values)
}

/// Builds a normalized clip from a parsed document.
///
/// Repeated JOINT sections for the same joint, and repeated ROOT sections,
/// are merged. The duration is the declared one, or the latest key time
/// when no DURATION line is present.
pub fn to_clip(doc: &AnimDocument) -> Result<Clip, ClipError> {
    let mut c = Clip::new(doc.name.clone(), 0.0);
    let mut root: Vec<TranslationKey> = Vec::new();
    for section in &doc.sections {
        match section {
            Section::Joint { name, tuples, .. } => {
                let keys = tuples
                    .iter()
                    .map(|t| RotationKey { time: t[4], rotation: Quaternion::new(t[0], t[1], t[2], t[3]) });
                match c.rotation_tracks.iter_mut().find(|tr| &tr.joint_name == name) {
                    Some(track) => track.keys.extend(keys),
                    None => c.rotation_tracks.push(RotationTrack { joint_name: name.clone(), keys: keys.collect() }),
                }
            }
            Section::Root { tuples, .. } => root.extend(
                tuples
                    .iter()
                    .map(|t| TranslationKey { time: t[3], translation: Vec3::new(t[0], t[1], t[2]) }),
            ),
        }
    }
    if !root.is_empty() {
        c.root_motion = Some(root);
    }
    c.duration = doc.duration.unwrap_or_else(|| c.max_key_time());
    let c = clip::normalize(&c)?;
    if c.duration.is_nan() || c.duration <= 0.0 {
        return Err(ClipError::InvalidDuration(c.duration));
    }
    Ok(c)
}

/// Canonical animation string for `c` with every number quantized by `q`.
pub fn serialize_animstring(c: &Clip, q: &QuantizeSpec) -> String {
    AnimDocument::from_clip(c).render(q)
}

/// Applies `q` to every number of `c`, then normalizes. This is the clip a
/// reader of `serialize_animstring(c, q)` reconstructs.
pub fn quantize_clip(c: &Clip, q: &QuantizeSpec) -> Result<Clip, ClipError> {
    let mut out = c.clone();
    out.duration = q.apply(out.duration);
    for track in &mut out.rotation_tracks {
        for k in &mut track.keys {
            k.time = q.apply(k.time);
            let r = k.rotation;
            k.rotation = Quaternion::new(q.apply(r.x), q.apply(r.y), q.apply(r.z), q.apply(r.w));
        }
    }
    for k in out.root_motion.iter_mut().flatten() {
        k.time = q.apply(k.time);
        let p = k.translation;
        k.translation = Vec3::new(q.apply(p.x), q.apply(p.y), q.apply(p.z));
    }
    // Grammar v1 carries no per-joint translation tracks.
    out.extra_translation_tracks.clear();
    clip::normalize(&out)
}

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAP: &str = "ANIMATION Flap\nDURATION 2\nJOINT Tail\n(0, 0, 0.3, 0.9, 0)\n(0, 0, -0.3, 0.9, 1)\nEND";

    #[test]
    fn parses_flap() {
        let doc = parse_animstring(FLAP).unwrap();
        assert_eq!(doc.name, "Flap");
        assert_eq!(doc.duration, Some(2.0));
        assert_eq!(
            doc.sections,
            vec![Section::Joint {
                name: "Tail".into(),
                line: 3,
                tuples: vec![[0.0, 0.0, 0.3, 0.9, 0.0], [0.0, 0.0, -0.3, 0.9, 1.0]],
            }]
        );
    }

    #[test]
    fn fences_are_ignored() {
        let fenced = format!("```text\n{FLAP}\n```\n");
        let mut a = parse_animstring(&fenced).unwrap();
        let b = parse_animstring(FLAP).unwrap();
        for s in &mut a.sections {
            if let Section::Joint { line, .. } = s {
                *line -= 1;
            }
        }
        assert_eq!(a, b);
    }

    #[test]
    fn tolerant_spacing_and_commas() {
        let text = "  animation Flap  \n\n DURATION 2,\n  JOINT   Tail\n(0,0,0.3,0.9,0,),\n   ( 0 , 0 , -0.3 , 0.9 , 1 )\n\nEND\n";
        let doc = parse_animstring(text).unwrap();
        assert_eq!(doc.sections[0].tuple_count(), 2);
        assert_eq!(doc.duration, Some(2.0));
    }

    #[test]
    fn arity_error_in_joint_section() {
        let err = parse_animstring("ANIMATION A\nJOINT Tail\n(0,0,0.3,0)\nEND").unwrap_err();
        assert_eq!(err, AnimStringError::Arity { section: "Tail".into(), line: 3 });
    }

    #[test]
    fn bare_joint_fragment_is_rejected() {
        let err = parse_animstring("JOINT Tail\n(0,0,0.3,0)").unwrap_err();
        assert_eq!(err, AnimStringError::Syntax { line: 1, column: 1, expected: "ANIMATION".into() });
    }

    #[test]
    fn error_positions() {
        let err = parse_animstring("ANIMATION A\nJOINT T\n(0, 0, x, 1, 0)\nEND").unwrap_err();
        assert_eq!(err, AnimStringError::Syntax { line: 3, column: 8, expected: "number".into() });
        let err = parse_animstring("ANIMATION A\nJOINT T\n(0,0,0,1,0)").unwrap_err();
        assert_eq!(err.code(), "SyntaxError");
        let err = parse_animstring("ANIMATION A\nJOINT T\nEND").unwrap_err();
        assert_eq!(err, AnimStringError::Syntax { line: 3, column: 1, expected: "tuple".into() });
        assert_eq!(parse_animstring(" \n```\n```").unwrap_err(), AnimStringError::EmptyDocument);
        let err = parse_animstring("ANIMATION A\nROOT\n(0,0,0,0)\nEND\nmore").unwrap_err();
        assert_eq!(err.code(), "SyntaxError");
        assert!(parse_animstring("ANIMATION A\nROOT\n(0,0,0,1e999)\nEND").is_err());
    }

    #[test]
    fn flap_to_clip_is_unit() {
        let c = to_clip(&parse_animstring(FLAP).unwrap()).unwrap();
        assert_eq!(c.rotation_tracks.len(), 1);
        assert_eq!(c.rotation_tracks[0].keys.len(), 2);
        for k in &c.rotation_tracks[0].keys {
            assert!((k.rotation.norm() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn root_only_document() {
        let c = to_clip(&parse_animstring("ANIMATION slide\nROOT\n(0,0,0,0)\n(1,0,0,1)\nEND").unwrap()).unwrap();
        assert!(c.rotation_tracks.is_empty());
        assert_eq!(c.root_motion.as_ref().map(Vec::len), Some(2));
        assert_eq!(c.duration, 1.0);
    }

    #[test]
    fn declared_duration_wins() {
        let c = to_clip(&parse_animstring("ANIMATION a\nDURATION 2\nJOINT j\n(0,0,0,1,0)\n(0,0,0,1,1)\nEND").unwrap()).unwrap();
        assert_eq!(c.duration, 2.0);
    }

    #[test]
    fn zero_duration_rejected() {
        let err = to_clip(&parse_animstring("ANIMATION a\nJOINT j\n(0,0,0,1,0)\nEND").unwrap()).unwrap_err();
        assert_eq!(err.code(), "InvalidDuration");
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("12345678"), 2);
        assert_eq!(estimate_tokens("123456789"), 3);
    }

    #[test]
    fn serialize_flap_one_sig_fig() {
        let c = to_clip(&parse_animstring(FLAP).unwrap()).unwrap();
        let text = serialize_animstring(&c, &QuantizeSpec::LLM_EXCHANGE);
        assert_eq!(text, "ANIMATION Flap\nDURATION 2\nJOINT Tail\n(0, 0, 0.3, 0.9, 0)\n(0, 0, -0.3, 0.9, 1)\nEND\n");
    }
}
