//! The CFG detection channel: complexity-weighted aggregate embedding
//! similarity per TPC version.

use crate::binfeat::Acfg;
use crate::tpcdb::TpcDatabase;
use crate::Real;

use super::embed::{acfg_similarity, cfg_weights, embed_acfg, Embedding, DEFAULT_EMBED_ITERATIONS};
use super::{Channel, MatchEvidence, MatchResult, Thresholds};

/// Aggregate-similarity difference below which two versions are
/// indistinguishable and the version result degrades to UNKNOWN.
const AGG_TIE_EPS: Real = 1e-6;

#[derive(Debug, Clone)]
pub struct CfgMatchConfig {
    /// Propagation rounds for the embedding.
    pub embed_iterations: usize,
    /// Compare only against firmware functions whose block count lies in
    /// `[n/2, 2n]`; similarity this far out cannot win anyway, and the
    /// band bounds the candidate scan. Disable for exactness tests.
    pub prune_block_band: bool,
}

impl Default for CfgMatchConfig {
    fn default() -> Self {
        CfgMatchConfig {
            embed_iterations: DEFAULT_EMBED_ITERATIONS,
            prune_block_band: true,
        }
    }
}

fn in_block_band(tpc_blocks: u64, fw_blocks: u64) -> bool {
    fw_blocks >= tpc_blocks.div_ceil(2) && fw_blocks <= tpc_blocks.saturating_mul(2)
}

/// Best similarity this TPC function reaches over the firmware functions.
fn best_function_similarity(
    tpc_acfg: &Acfg,
    tpc_embedding: &Embedding,
    fw: &[(u64, Embedding)],
    prune: bool,
) -> Real {
    fw.iter()
        .filter(|(blocks, _)| !prune || in_block_band(tpc_acfg.func_attrs.n_blocks, *blocks))
        .map(|(_, fw_embedding)| {
            acfg_similarity(tpc_embedding, fw_embedding).expect("uniform embedding length")
        })
        .fold(0.0, Real::max)
}

/// Aggregate similarity of one version's ACFG set against the firmware:
/// per-graph best similarities combined under complexity weights.
pub fn aggregate_similarity(
    acfgs: &[Acfg],
    fw: &[(u64, Embedding)],
    config: &CfgMatchConfig,
) -> Option<Real> {
    let weights: Vec<Real> = cfg_weights(acfgs).ok()?;
    let agg = acfgs
        .iter()
        .zip(&weights)
        .map(|(acfg, w)| {
            let e = embed_acfg(acfg, config.embed_iterations);
            best_function_similarity(acfg, &e, fw, config.prune_block_band) * w
        })
        .sum();
    Some(agg)
}

/// Pick the version for one TPC from `(version, aggregate)` pairs:
/// argmax over those reaching `gamma`, ties collapsing to UNKNOWN.
pub fn decide_cfg(tpc: &str, aggs: &[(String, Real)], gamma: Real) -> Option<MatchResult> {
    let mut best: Option<(Real, &str)> = None;
    let mut tied = false;
    for (version, agg) in aggs {
        if *agg < gamma {
            continue;
        }
        match best {
            None => best = Some((*agg, version)),
            Some((top, _)) => {
                if *agg > top + AGG_TIE_EPS {
                    best = Some((*agg, version));
                    tied = false;
                } else if (*agg - top).abs() <= AGG_TIE_EPS {
                    tied = true;
                }
            }
        }
    }
    let (score, version) = best?;
    Some(MatchResult {
        tpc: tpc.to_string(),
        version: (!tied).then(|| version.to_string()),
        channel: Channel::Cfg,
        score,
        evidence: MatchEvidence {
            cfg_similarity: Some(score),
            ..Default::default()
        },
    })
}

/// Precompute `(block count, embedding)` for the firmware functions.
pub fn embed_firmware(fw_acfgs: &[Acfg], config: &CfgMatchConfig) -> Vec<(u64, Embedding)> {
    fw_acfgs
        .iter()
        .map(|a| (a.func_attrs.n_blocks, embed_acfg(a, config.embed_iterations)))
        .collect()
}

/// Threshold-independent aggregates per TPC: `(tpc, [(version, agg)])`.
pub fn cfg_aggregates(
    db: &TpcDatabase,
    fw_acfgs: &[Acfg],
    config: &CfgMatchConfig,
) -> Vec<(String, Vec<(String, Real)>)> {
    if fw_acfgs.is_empty() {
        return Vec::new();
    }
    let fw = embed_firmware(fw_acfgs, config);
    db.tpcs
        .values()
        .filter_map(|record| {
            let aggs: Vec<(String, Real)> = record
                .versions
                .iter()
                .filter_map(|v| {
                    if v.acfgs.is_empty() {
                        log::warn!(
                            "{} {} has no ACFGs; skipped by the CFG channel",
                            record.name,
                            v.version
                        );
                        return None;
                    }
                    aggregate_similarity(&v.acfgs, &fw, config).map(|agg| (v.version.clone(), agg))
                })
                .collect();
            (!aggs.is_empty()).then(|| (record.name.clone(), aggs))
        })
        .collect()
}

/// Run the CFG channel over one image's recovered functions.
pub fn cfg_match(
    db: &TpcDatabase,
    fw_acfgs: &[Acfg],
    th: &Thresholds,
    config: &CfgMatchConfig,
) -> Vec<MatchResult> {
    let mut out: Vec<MatchResult> = cfg_aggregates(db, fw_acfgs, config)
        .iter()
        .filter_map(|(tpc, aggs)| decide_cfg(tpc, aggs, th.gamma))
        .collect();
    out.sort_by(|a, b| a.tpc.cmp(&b.tpc));
    out
}
