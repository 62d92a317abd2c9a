// SPDX-License-Identifier: Apache-2.0

//! Engineering-suffix numbers (`2.5p`, `10meg`, `1e-12`).

/// Multiplier for a (lower-cased) suffix, or `None` if the suffix is unknown.
pub fn suffix_factor(suffix: &str) -> Option<f64> {
    Some(match suffix {
        "" => 1.0,
        "f" => 1e-15,
        "p" => 1e-12,
        "n" => 1e-9,
        "u" => 1e-6,
        "m" => 1e-3,
        "k" => 1e3,
        "meg" => 1e6,
        "g" => 1e9,
        _ => return None,
    })
}

/// Length of the longest prefix of `s` that is a decimal float literal.
fn float_prefix_len(s: &[u8]) -> usize {
    let mut i = 0;
    if i < s.len() && (s[i] == b'+' || s[i] == b'-') {
        i += 1;
    }
    let mut digits = 0;
    while i < s.len() && s[i].is_ascii_digit() {
        i += 1;
        digits += 1;
    }
    if i < s.len() && s[i] == b'.' {
        i += 1;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
    }
    if digits == 0 {
        return 0;
    }
    // An exponent only counts when at least one digit follows it, so `1meg`
    // and `2e` are not swallowed.
    if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
        let mut j = i + 1;
        if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
            j += 1;
        }
        let start = j;
        while j < s.len() && s[j].is_ascii_digit() {
            j += 1;
        }
        if j > start {
            i = j;
        }
    }
    i
}

/// Parses a value token. The result is `mantissa * factor(suffix)`.
pub fn parse_value(token: &str) -> Option<f64> {
    let lower = token.to_ascii_lowercase();
    let n = float_prefix_len(lower.as_bytes());
    if n == 0 {
        return None;
    }
    let mantissa: f64 = lower[..n].parse().ok()?;
    let factor = suffix_factor(&lower[n..])?;
    let v = mantissa * factor;
    v.is_finite().then_some(v)
}

/// Formats a value so that [`parse_value`] reads back the identical `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:e}")
}
