//! The syntactic detection channel.
//!
//! Sharing features drive TPC-level identification, unique features
//! drive version-level identification; both use the matched-feature
//! ratio against `beta`, with individual features matched by edit
//! similarity against `alpha`.

use std::collections::{BTreeMap, BTreeSet};

use crate::binfeat::BinaryFeatures;
use crate::tpcdb::TpcDatabase;
use crate::Real;

use super::edit::{best_similarities, count_at_least, matched_features};
use super::{Channel, MatchEvidence, MatchResult, Thresholds};

/// Ratio difference below which two versions count as indistinguishable.
const VERSION_TIE_EPS: Real = 1e-9;

/// TPC function signatures carry parameter types; firmware symbols do
/// not. Matching compares name parts only.
pub(crate) fn function_name_only(feature: &str) -> &str {
    feature.split('(').next().unwrap_or(feature)
}

/// Matched/total feature counts for one TPC at a fixed `alpha`.
#[derive(Debug, Clone, Default)]
pub struct SyntaxCounts {
    pub tpc: String,
    pub sharing_matched: usize,
    pub sharing_total: usize,
    /// `(version, unique_matched, unique_total)` per version.
    pub versions: Vec<(String, usize, usize)>,
}

/// Apply the ratio rules to precomputed counts. `None` when the TPC does
/// not reach `beta` over its sharing features.
pub fn decide_syntax(counts: &SyntaxCounts, beta: Real) -> Option<MatchResult> {
    if counts.sharing_total == 0 {
        return None;
    }
    let sharing_ratio = counts.sharing_matched as Real / counts.sharing_total as Real;
    if sharing_ratio < beta {
        return None;
    }

    // Version level: a version with no unique features can never match.
    let mut best: Option<(Real, &str, usize, usize)> = None;
    let mut tied = false;
    for (version, matched, total) in &counts.versions {
        if *total == 0 {
            continue;
        }
        let ratio = *matched as Real / *total as Real;
        if ratio < beta {
            continue;
        }
        match best {
            None => best = Some((ratio, version, *matched, *total)),
            Some((top, ..)) => {
                if ratio > top + VERSION_TIE_EPS {
                    best = Some((ratio, version, *matched, *total));
                    tied = false;
                } else if (ratio - top).abs() <= VERSION_TIE_EPS {
                    tied = true;
                } // else strictly below: keep current best
            }
        }
    }

    let (version, score, unique_matched, unique_total) = match best {
        Some((ratio, version, matched, total)) if !tied => {
            (Some(version.to_string()), ratio, Some(matched), Some(total))
        }
        // Tie between versions: the TPC stays matched, the version does not.
        Some((_, _, matched, total)) => (None, sharing_ratio, Some(matched), Some(total)),
        None => (None, sharing_ratio, None, None),
    };

    Some(MatchResult {
        tpc: counts.tpc.clone(),
        version,
        channel: Channel::Syntax,
        score,
        evidence: MatchEvidence {
            sharing_matched: Some(counts.sharing_matched),
            sharing_total: Some(counts.sharing_total),
            unique_matched,
            unique_total,
            ..Default::default()
        },
    })
}

fn count_matched(
    tpc_strings: &BTreeSet<String>,
    tpc_functions: &BTreeSet<String>,
    fw: &BinaryFeatures,
    alpha: Real,
) -> (usize, usize) {
    let matched_strings = matched_features(tpc_strings, &fw.strings, alpha).len();

    // Dedup stripped function names, then count original features whose
    // stripped form matched.
    let stripped: BTreeSet<String> = tpc_functions
        .iter()
        .map(|f| function_name_only(f).to_string())
        .collect();
    let matched_names = matched_features(&stripped, &fw.function_names, alpha);
    let matched_functions = tpc_functions
        .iter()
        .filter(|f| matched_names.contains(function_name_only(f)))
        .count();

    (
        matched_strings + matched_functions,
        tpc_strings.len() + tpc_functions.len(),
    )
}

/// Run the syntactic channel over one image's features.
///
/// TPCs with no sharing features are skipped with a warning. Results are
/// sorted by TPC name.
pub fn syntactic_match(db: &TpcDatabase, fw: &BinaryFeatures, th: &Thresholds) -> Vec<MatchResult> {
    let mut out = Vec::new();
    for record in db.tpcs.values() {
        let Some(first) = record.versions.first() else {
            log::warn!("TPC {:?} has no versions; skipped", record.name);
            continue;
        };
        if first.sharing_strings.is_empty() && first.sharing_functions.is_empty() {
            log::warn!("TPC {:?} has an empty sharing signature; skipped", record.name);
            continue;
        }
        let (sharing_matched, sharing_total) = count_matched(
            &first.sharing_strings,
            &first.sharing_functions,
            fw,
            th.alpha,
        );
        let counts = SyntaxCounts {
            tpc: record.name.clone(),
            sharing_matched,
            sharing_total,
            versions: record
                .versions
                .iter()
                .map(|v| {
                    let (m, t) = count_matched(&v.unique_strings, &v.unique_functions, fw, th.alpha);
                    (v.version.clone(), m, t)
                })
                .collect(),
        };
        if let Some(result) = decide_syntax(&counts, th.beta) {
            out.push(result);
        }
    }
    out.sort_by(|a, b| a.tpc.cmp(&b.tpc));
    out
}

/// Threshold-independent similarity profile of one TPC against one
/// image, for sweeping `(alpha, beta)` without re-running edit distance.
#[derive(Debug, Clone)]
pub struct SyntaxProfile {
    pub tpc: String,
    /// Descending best similarity per sharing feature.
    pub sharing_best: Vec<Real>,
    /// Per version: descending best similarity per unique feature.
    pub versions: Vec<(String, Vec<Real>)>,
}

impl SyntaxProfile {
    pub fn counts_at(&self, alpha: Real) -> SyntaxCounts {
        SyntaxCounts {
            tpc: self.tpc.clone(),
            sharing_matched: count_at_least(&self.sharing_best, alpha),
            sharing_total: self.sharing_best.len(),
            versions: self
                .versions
                .iter()
                .map(|(v, best)| (v.clone(), count_at_least(best, alpha), best.len()))
                .collect(),
        }
    }
}

fn profile_sets(
    strings: &BTreeSet<String>,
    functions: &BTreeSet<String>,
    fw: &BinaryFeatures,
) -> Vec<Real> {
    let mut best = best_similarities(strings, &fw.strings);
    // Shared stripped-name similarities expand back to per-feature ones.
    let stripped: BTreeSet<String> = functions
        .iter()
        .map(|f| function_name_only(f).to_string())
        .collect();
    let name_best: BTreeMap<String, Real> = stripped
        .iter()
        .cloned()
        .zip(best_similarities_per_feature(&stripped, &fw.function_names))
        .collect();
    best.extend(functions.iter().map(|f| name_best[function_name_only(f)]));
    best.sort_by(|a, b| b.partial_cmp(a).unwrap());
    best
}

/// Best similarity per feature in iteration (sorted-set) order.
fn best_similarities_per_feature(features: &BTreeSet<String>, fw: &BTreeSet<String>) -> Vec<Real> {
    features
        .iter()
        .map(|feature| {
            if fw.contains(feature) {
                return 1.0;
            }
            fw.iter()
                .map(|cand| super::edit::edit_similarity::<Real>(feature, cand))
                .fold(0.0, Real::max)
        })
        .collect()
}

/// Build threshold-independent profiles for every TPC in the database.
pub fn syntax_profiles(db: &TpcDatabase, fw: &BinaryFeatures) -> Vec<SyntaxProfile> {
    db.tpcs
        .values()
        .filter_map(|record| {
            let first = record.versions.first()?;
            if first.sharing_strings.is_empty() && first.sharing_functions.is_empty() {
                return None;
            }
            Some(SyntaxProfile {
                tpc: record.name.clone(),
                sharing_best: profile_sets(&first.sharing_strings, &first.sharing_functions, fw),
                versions: record
                    .versions
                    .iter()
                    .map(|v| {
                        (
                            v.version.clone(),
                            profile_sets(&v.unique_strings, &v.unique_functions, fw),
                        )
                    })
                    .collect(),
            })
        })
        .collect()
}
