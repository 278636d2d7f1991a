//! Number formatting shared by the canonical JSON writers.

/// Formats `v` with at most six decimal places, no exponent, trailing zeros
/// trimmed. Negative zero prints as `0`.
pub fn fixed6(v: f64) -> String {
    trim_fixed(format!("{v:.6}"))
}

/// Six-decimal fixed formatting without trimming, as used by the CSV export.
pub fn fixed6_padded(v: f64) -> String {
    let s = format!("{v:.6}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub(crate) fn trim_fixed(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// Writes a JSON string literal.
pub(crate) fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}
