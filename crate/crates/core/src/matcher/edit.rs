//! Normalized edit-distance similarity and feature-set matching.

use std::collections::BTreeSet;

use crate::num::Scalar;
use crate::Real;

/// Levenshtein distance over bytes, two-row dynamic programming.
pub fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - lev(a,b) / max(|a|,|b|)`, in `[0, 1]`; two empty strings have
/// similarity 1.
pub fn edit_similarity<T: Scalar>(a: &str, b: &str) -> T {
    let max_len = a.len().max(b.len());
    if max_len == 0 {
        return T::one();
    }
    let lev = levenshtein(a.as_bytes(), b.as_bytes());
    T::one() - T::from_count(lev) / T::from_count(max_len)
}

/// Maximum length difference a candidate may have and still reach
/// similarity `alpha` against a string involved in a pair of maximum
/// length `max_len`: `lev >= |la-lb|`, so anything farther is unreachable.
fn band_allows(alpha: Real, la: usize, lb: usize) -> bool {
    let max_len = la.max(lb);
    let diff = la.abs_diff(lb);
    diff as Real <= ((1.0 - alpha) * max_len as Real).ceil()
}

/// The subset of `tpc_features` that match some firmware feature with
/// similarity at least `alpha`. Exact equality short-circuits;
/// inexact candidates are restricted to the sound length band.
pub fn matched_features<'a>(
    tpc_features: &'a BTreeSet<String>,
    fw_features: &BTreeSet<String>,
    alpha: Real,
) -> BTreeSet<&'a str> {
    assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
    // Group firmware features by byte length once.
    let mut by_len: std::collections::BTreeMap<usize, Vec<&str>> = Default::default();
    for f in fw_features {
        by_len.entry(f.len()).or_default().push(f);
    }
    let mut out = BTreeSet::new();
    for feature in tpc_features {
        if fw_features.contains(feature) {
            out.insert(feature.as_str());
            continue;
        }
        let la = feature.len();
        let hit = by_len
            .iter()
            .filter(|(&lb, _)| band_allows(alpha, la, lb))
            .flat_map(|(_, group)| group.iter())
            .any(|cand| edit_similarity::<Real>(feature, cand) >= alpha);
        if hit {
            out.insert(feature.as_str());
        }
    }
    out
}

/// Number of TPC features matched at threshold `alpha`.
pub fn match_feature_set(
    tpc_features: &BTreeSet<String>,
    fw_features: &BTreeSet<String>,
    alpha: Real,
) -> usize {
    matched_features(tpc_features, fw_features, alpha).len()
}

/// Best similarity each TPC feature reaches against the firmware set
/// (1.0 short-circuit on exact membership). Sorted descending, so
/// `matched(alpha)` is a partition point; this is what threshold tuning
/// sweeps over.
pub fn best_similarities(tpc_features: &BTreeSet<String>, fw_features: &BTreeSet<String>) -> Vec<Real> {
    let mut sims: Vec<Real> = tpc_features
        .iter()
        .map(|feature| {
            if fw_features.contains(feature) {
                return 1.0;
            }
            fw_features
                .iter()
                .map(|cand| edit_similarity::<Real>(feature, cand))
                .fold(0.0, Real::max)
        })
        .collect();
    sims.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sims
}

/// How many entries of a descending similarity list reach `alpha`.
pub fn count_at_least(sorted_desc: &[Real], alpha: Real) -> usize {
    sorted_desc.partition_point(|&s| s >= alpha)
}
