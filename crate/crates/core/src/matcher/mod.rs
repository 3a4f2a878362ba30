//! TPC detection: syntactic matching, weighted ACFG similarity, result
//! union, threshold tuning, and precision/recall evaluation.

pub mod cfgmatch;
pub mod edit;
pub mod embed;
pub mod syntactic;
pub mod tune;
pub mod union;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

pub use cfgmatch::{cfg_match, CfgMatchConfig};
pub use edit::{edit_similarity, levenshtein, match_feature_set};
pub use embed::{
    acfg_similarity, cfg_weights, cyclomatic_complexity, embed_acfg, Embedding,
    DEFAULT_EMBED_ITERATIONS,
};
pub use syntactic::syntactic_match;
pub use tune::{evaluate, tune_thresholds, EvalReport, LabeledImage, PrMetrics};
pub use union::union_merge;

#[derive(Debug, Error)]
pub enum MatchError {
    /// A TPC (or version) carries no usable signature material.
    #[error("empty signature for {0}")]
    EmptySignature(String),
    #[error("embedding length mismatch ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    /// Total cyclomatic complexity not positive.
    #[error("degenerate CFG weights (total complexity {total})")]
    DegenerateWeights { total: i64 },
    #[error("empty labeled dataset")]
    EmptyDataset,
}

/// The three detection thresholds: feature similarity `alpha`, matched
/// ratio `beta`, aggregate ACFG similarity `gamma`. Each lies in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub alpha: Real,
    pub beta: Real,
    pub gamma: Real,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            alpha: 0.74,
            beta: 0.52,
            gamma: 0.64,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("threshold {name} = {v} outside (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Which channel produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Syntax,
    Cfg,
    Union,
}

/// Supporting numbers behind a match.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchEvidence {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sharing_matched: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sharing_total: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unique_matched: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unique_total: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cfg_similarity: Option<Real>,
    /// Set when the two channels named different concrete versions.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub version_conflict: Option<String>,
}

/// A detected (TPC, version) pair. `version: None` renders as `UNKNOWN`:
/// the component was identified but no version reached the bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub tpc: String,
    pub version: Option<String>,
    pub channel: Channel,
    /// Achieved ratio (syntax) or aggregate similarity (cfg), in [0, 1].
    pub score: Real,
    #[serde(default)]
    pub evidence: MatchEvidence,
}

impl MatchResult {
    pub fn version_label(&self) -> &str {
        self.version
            .as_deref()
            .unwrap_or(crate::tpcdb::UNKNOWN_VERSION)
    }
}
