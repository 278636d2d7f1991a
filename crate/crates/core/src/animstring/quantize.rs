//! Decimal quantization of floats for the animation string.
//!
//! Rounding works on the shortest decimal representation of the float, so
//! `0.15` rounds to `0.2` at one significant figure even though the nearest
//! binary double is slightly below 0.15. Halves round away from zero.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizeMode {
    SignificantFigures,
    DecimalPlaces,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Round half away from zero.
    #[default]
    HalfAwayFromZero,
    /// Drop the extra digits (toward zero).
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizeSpec {
    pub mode: QuantizeMode,
    pub digits: u32,
    #[serde(default)]
    pub rounding: Rounding,
}

impl QuantizeSpec {
    /// One significant figure, the precision used when exchanging clips
    /// with a language model.
    pub const LLM_EXCHANGE: QuantizeSpec = QuantizeSpec::significant_figures(1);
    /// Four decimal places, for files meant to be kept.
    pub const ARCHIVAL: QuantizeSpec = QuantizeSpec::decimal_places(4);

    /// `digits` below one are raised to one.
    pub const fn significant_figures(digits: u32) -> Self {
        Self {
            mode: QuantizeMode::SignificantFigures,
            digits: if digits == 0 { 1 } else { digits },
            rounding: Rounding::HalfAwayFromZero,
        }
    }

    /// `digits` below one are raised to one.
    pub const fn decimal_places(digits: u32) -> Self {
        Self {
            mode: QuantizeMode::DecimalPlaces,
            digits: if digits == 0 { 1 } else { digits },
            rounding: Rounding::HalfAwayFromZero,
        }
    }

    pub const fn truncating(mut self) -> Self {
        self.rounding = Rounding::Truncate;
        self
    }

    /// Plain decimal text for `v` at this precision, no exponent, trailing
    /// zeros removed.
    pub fn format(&self, v: f64) -> String {
        if !v.is_finite() {
            return format!("{v}");
        }
        if v == 0.0 {
            return "0".into();
        }
        let (negative, digits, exp) = decompose(v);
        let keep = match self.mode {
            QuantizeMode::SignificantFigures => self.digits as i64,
            QuantizeMode::DecimalPlaces => exp + 1 + self.digits as i64,
        };
        let (digits, exp) = round_digits(digits, exp, keep, self.rounding);
        render(negative, &digits, exp)
    }

    pub fn apply(&self, v: f64) -> f64 {
        self.format(v).parse().unwrap_or(v)
    }
}

impl Default for QuantizeSpec {
    fn default() -> Self {
        Self::ARCHIVAL
    }
}

/// Sign, decimal digits (no leading zeros), and the power of ten of the
/// first digit.
fn decompose(v: f64) -> (bool, Vec<u8>, i64) {
    let s = format!("{:e}", v.abs());
    let (mantissa, exp) = s.split_once('e').expect("exponent format");
    let exp: i64 = exp.parse().expect("integer exponent");
    let digits = mantissa.bytes().filter(u8::is_ascii_digit).map(|b| b - b'0').collect();
    (v < 0.0, digits, exp)
}

/// Keeps the first `keep` digits. Returns the rounded digits and exponent;
/// an empty digit list means zero.
fn round_digits(digits: Vec<u8>, exp: i64, keep: i64, rounding: Rounding) -> (Vec<u8>, i64) {
    if keep >= digits.len() as i64 {
        return (digits, exp);
    }
    let round_up = rounding == Rounding::HalfAwayFromZero && keep >= 0 && digits[keep as usize] >= 5;
    if keep <= 0 {
        // Everything is below the last kept place; only a carry into the
        // place just above the first digit can survive.
        return if keep == 0 && round_up { (vec![1], exp + 1) } else { (Vec::new(), 0) };
    }
    let mut kept: Vec<u8> = digits[..keep as usize].to_vec();
    let mut exp = exp;
    if round_up {
        let mut i = kept.len();
        loop {
            if i == 0 {
                kept.insert(0, 1);
                kept.pop();
                exp += 1;
                break;
            }
            i -= 1;
            if kept[i] == 9 {
                kept[i] = 0;
            } else {
                kept[i] += 1;
                break;
            }
        }
    }
    while kept.last() == Some(&0) {
        kept.pop();
    }
    (kept, exp)
}

fn render(negative: bool, digits: &[u8], exp: i64) -> String {
    if digits.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    if negative {
        s.push('-');
    }
    let char_of = |d: u8| char::from(b'0' + d);
    if exp < 0 {
        s.push_str("0.");
        for _ in 0..(-exp - 1) {
            s.push('0');
        }
        s.extend(digits.iter().copied().map(char_of));
    } else {
        let int_len = exp as usize + 1;
        for i in 0..int_len.max(digits.len()) {
            if i == int_len {
                s.push('.');
            }
            s.push(digits.get(i).copied().map_or('0', char_of));
        }
    }
    s
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    const SIG1: QuantizeSpec = QuantizeSpec::significant_figures(1);

    #[test]
    fn one_significant_figure() {
        assert_eq!(SIG1.format(0.1234), "0.1");
        assert_eq!(SIG1.format(0.04678), "0.05");
        assert_eq!(SIG1.truncating().format(0.04678), "0.04");
        assert_eq!(SIG1.truncating().format(0.99), "0.9");
        assert_eq!(SIG1.format(0.99), "1");
        assert_eq!(SIG1.format(-0.25), "-0.3");
        assert_eq!(SIG1.format(950.0), "1000");
        assert_eq!(SIG1.format(-0.0), "0");
    }

    #[test]
    fn decimal_places() {
        let dp2 = QuantizeSpec::decimal_places(2);
        assert_eq!(dp2.format(0.125), "0.13");
        assert_eq!(dp2.format(0.004), "0");
        assert_eq!(dp2.format(0.005), "0.01");
        assert_eq!(dp2.format(-0.005), "-0.01");
        assert_eq!(dp2.format(12.3456), "12.35");
        assert_eq!(dp2.format(9.999), "10");
        assert_eq!(dp2.format(3.0), "3");
    }

    #[test]
    fn apply_matches_format() {
        assert_eq!(SIG1.apply(0.04678), 0.05);
        assert_eq!(QuantizeSpec::ARCHIVAL.apply(0.70710678), 0.7071);
    }
}
