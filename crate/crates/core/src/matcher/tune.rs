//! Threshold grid search and precision/recall evaluation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::binfeat::BinaryFeatures;
use crate::tpcdb::TpcDatabase;
use crate::Real;

use super::cfgmatch::{cfg_aggregates, decide_cfg, CfgMatchConfig};
use super::syntactic::{decide_syntax, syntax_profiles, SyntaxProfile};
use super::union::union_merge;
use super::{MatchError, MatchResult, Thresholds};

/// One labeled corpus entry: extracted features plus the ground-truth
/// `(tpc, version)` set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledImage {
    pub image_id: String,
    pub features: BinaryFeatures,
    pub truth: BTreeSet<(String, String)>,
}

struct ImageProfiles {
    syntax: Vec<SyntaxProfile>,
    cfg: Vec<(String, Vec<(String, Real)>)>,
    truth: BTreeSet<(String, String)>,
}

fn match_at(profiles: &ImageProfiles, th: &Thresholds) -> Vec<MatchResult> {
    let r_syntax: Vec<MatchResult> = profiles
        .syntax
        .iter()
        .filter_map(|p| decide_syntax(&p.counts_at(th.alpha), th.beta))
        .collect();
    let r_cfg: Vec<MatchResult> = profiles
        .cfg
        .iter()
        .filter_map(|(tpc, aggs)| decide_cfg(tpc, aggs, th.gamma))
        .collect();
    union_merge(r_syntax, r_cfg)
}

/// Version-level true positives of one result set against one truth set.
fn version_tp(results: &[MatchResult], truth: &BTreeSet<(String, String)>) -> usize {
    results
        .iter()
        .filter_map(|r| {
            let v = r.version.as_ref()?;
            truth.contains(&(r.tpc.clone(), v.clone())).then_some(())
        })
        .count()
}

/// Exhaustive grid search over `(alpha, beta, gamma)` maximizing
/// version-level TPR, ties broken by the lexicographically smallest
/// triple. The grid is `{step, 2*step, ..., 1.0}` per axis.
pub fn tune_thresholds(
    db: &TpcDatabase,
    labeled: &[LabeledImage],
    grid_step: Real,
) -> Result<Thresholds, MatchError> {
    if labeled.is_empty() {
        return Err(MatchError::EmptyDataset);
    }
    assert!(grid_step > 0.0 && grid_step < 1.0, "grid step must lie in (0, 1)");

    let cfg_config = CfgMatchConfig::default();
    let profiles: Vec<ImageProfiles> = labeled
        .iter()
        .map(|li| ImageProfiles {
            syntax: syntax_profiles(db, &li.features),
            cfg: cfg_aggregates(db, &li.features.acfgs, &cfg_config),
            truth: li.truth.clone(),
        })
        .collect();
    let total_truth: usize = profiles.iter().map(|p| p.truth.len()).sum();

    let steps = (1.0 / grid_step).round() as usize;
    let grid: Vec<Real> = (1..=steps).map(|k| (k as Real * grid_step).min(1.0)).collect();

    let mut best = (Thresholds { alpha: grid[0], beta: grid[0], gamma: grid[0] }, -1.0);
    for &alpha in &grid {
        // Counts depend on alpha only; hoist them out of the inner axes.
        let counts: Vec<Vec<super::syntactic::SyntaxCounts>> = profiles
            .iter()
            .map(|p| p.syntax.iter().map(|s| s.counts_at(alpha)).collect())
            .collect();
        for &beta in &grid {
            for &gamma in &grid {
                let th = Thresholds { alpha, beta, gamma };
                let mut tp = 0usize;
                for (profile, image_counts) in profiles.iter().zip(&counts) {
                    let r_syntax: Vec<MatchResult> = image_counts
                        .iter()
                        .filter_map(|c| decide_syntax(c, beta))
                        .collect();
                    let r_cfg: Vec<MatchResult> = profile
                        .cfg
                        .iter()
                        .filter_map(|(tpc, aggs)| decide_cfg(tpc, aggs, gamma))
                        .collect();
                    tp += version_tp(&union_merge(r_syntax, r_cfg), &profile.truth);
                }
                let tpr = if total_truth == 0 {
                    0.0
                } else {
                    tp as Real / total_truth as Real
                };
                if tpr > best.1 {
                    best = (th, tpr);
                }
            }
        }
    }
    Ok(best.0)
}

/// Matching results for a labeled image at fixed thresholds, through the
/// same decision path the tuner sweeps. Used by tests to cross-check the
/// grid search against direct evaluation.
pub fn match_labeled(db: &TpcDatabase, image: &LabeledImage, th: &Thresholds) -> Vec<MatchResult> {
    let profiles = ImageProfiles {
        syntax: syntax_profiles(db, &image.features),
        cfg: cfg_aggregates(db, &image.features.acfgs, &CfgMatchConfig::default()),
        truth: image.truth.clone(),
    };
    match_at(&profiles, th)
}

/// Precision/recall pair. When a denominator is zero the metric reports
/// 1.0 with the `undefined` flag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrMetrics {
    pub precision: Real,
    pub recall: Real,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tpc_level: PrMetrics,
    pub version_level: PrMetrics,
}

fn metrics(tp: usize, fp: usize, fn_: usize) -> PrMetrics {
    let precision_undefined = tp + fp == 0;
    let recall_undefined = tp + fn_ == 0;
    PrMetrics {
        precision: if precision_undefined {
            1.0
        } else {
            tp as Real / (tp + fp) as Real
        },
        recall: if recall_undefined {
            1.0
        } else {
            tp as Real / (tp + fn_) as Real
        },
        precision_undefined,
        recall_undefined,
    }
}

/// Precision and recall at TPC level (name only) and version level
/// (name + concrete version).
///
/// UNKNOWN-version results never count as version-level true positives;
/// they are abstentions, so they do not count as version-level false
/// positives either, but the missed truth pair still counts against
/// recall.
pub fn evaluate(
    results: &BTreeMap<String, Vec<MatchResult>>,
    truth: &BTreeMap<String, BTreeSet<(String, String)>>,
) -> EvalReport {
    let (mut tpc_tp, mut tpc_fp, mut tpc_fn) = (0usize, 0usize, 0usize);
    let (mut ver_tp, mut ver_fp, mut ver_fn) = (0usize, 0usize, 0usize);

    let empty_truth = BTreeSet::new();
    let empty_results = Vec::new();
    let image_ids: BTreeSet<&String> = results.keys().chain(truth.keys()).collect();

    for image in image_ids {
        let r = results.get(image).unwrap_or(&empty_results);
        let t = truth.get(image).unwrap_or(&empty_truth);

        let predicted_names: BTreeSet<&str> = r.iter().map(|m| m.tpc.as_str()).collect();
        let truth_names: BTreeSet<&str> = t.iter().map(|(n, _)| n.as_str()).collect();
        tpc_tp += predicted_names.intersection(&truth_names).count();
        tpc_fp += predicted_names.difference(&truth_names).count();
        tpc_fn += truth_names.difference(&predicted_names).count();

        let predicted_pairs: BTreeSet<(String, String)> = r
            .iter()
            .filter_map(|m| m.version.clone().map(|v| (m.tpc.clone(), v)))
            .collect();
        ver_tp += predicted_pairs.intersection(t).count();
        ver_fp += predicted_pairs.difference(t).count();
        ver_fn += t.difference(&predicted_pairs).count();
    }

    EvalReport {
        tpc_level: metrics(tpc_tp, tpc_fp, tpc_fn),
        version_level: metrics(ver_tp, ver_fp, ver_fn),
    }
}
