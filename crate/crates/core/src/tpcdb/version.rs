//! Total ordering over free-form version strings.

use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Run {
    // Numeric runs order before alphabetic runs at the same position, and
    // both order by their natural comparison within a kind.
    Number(u64),
    Alpha(String),
}

/// Split a version string into alternating numeric and alphabetic runs.
/// `.`, `-`, `_` separate runs, as does any digit/alpha boundary; other
/// characters separate runs and are otherwise ignored.
fn runs(version: &str) -> Vec<Run> {
    let mut out = Vec::new();
    let mut digits = String::new();
    let mut alpha = String::new();
    let flush_digits = |digits: &mut String, out: &mut Vec<Run>| {
        if !digits.is_empty() {
            // Saturate rather than fail on absurdly long digit runs.
            let n = digits.parse::<u64>().unwrap_or(u64::MAX);
            out.push(Run::Number(n));
            digits.clear();
        }
    };
    let flush_alpha = |alpha: &mut String, out: &mut Vec<Run>| {
        if !alpha.is_empty() {
            out.push(Run::Alpha(std::mem::take(alpha)));
        }
    };
    for c in version.chars() {
        if c.is_ascii_digit() {
            flush_alpha(&mut alpha, &mut out);
            digits.push(c);
        } else if c.is_ascii_alphabetic() {
            flush_digits(&mut digits, &mut out);
            alpha.push(c.to_ascii_lowercase());
        } else {
            flush_digits(&mut digits, &mut out);
            flush_alpha(&mut alpha, &mut out);
        }
    }
    flush_digits(&mut digits, &mut out);
    flush_alpha(&mut alpha, &mut out);
    out
}

/// Compare two version strings component-wise: numeric runs numerically,
/// alphabetic runs lexicographically, missing components ranking lower.
/// Yields a total order.
pub fn compare_versions(a: &str, b: &str) -> Ordering {
    let ra = runs(a);
    let rb = runs(b);
    for (x, y) in ra.iter().zip(rb.iter()) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    ra.len().cmp(&rb.len())
}

/// `true` when the two strings denote the same version (equal runs, so
/// `1.0` equals `1.0.0` only if written identically; it does equal
/// `1_0` and `1.0`).
pub fn versions_equal(a: &str, b: &str) -> bool {
    compare_versions(a, b) == Ordering::Equal
}
