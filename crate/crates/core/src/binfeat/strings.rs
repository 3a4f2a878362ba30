//! Printable-string extraction from raw bytes.

use std::collections::BTreeSet;

/// Default minimum string length used throughout the pipeline.
pub const DEFAULT_MIN_STRING_LEN: usize = 4;

fn is_printable(b: u8) -> bool {
    (0x20..=0x7e).contains(&b) || b == b'\t'
}

/// Every maximal run of printable ASCII (0x20-0x7E plus tab) of length at
/// least `min_len`, set semantics. A run that reaches the end of input
/// without a terminator is included.
pub fn extract_strings(bytes: &[u8], min_len: usize) -> BTreeSet<String> {
    assert!(min_len >= 1, "min_len must be at least 1");
    let mut out = BTreeSet::new();
    let mut start = None;
    for (i, &b) in bytes.iter().enumerate() {
        match (is_printable(b), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s >= min_len {
                    out.insert(String::from_utf8_lossy(&bytes[s..i]).into_owned());
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if bytes.len() - s >= min_len {
            out.insert(String::from_utf8_lossy(&bytes[s..]).into_owned());
        }
    }
    out
}
