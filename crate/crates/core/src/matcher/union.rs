//! Union of the two channels' results.

use std::collections::BTreeMap;

use super::{Channel, MatchResult};

fn relabel(mut r: MatchResult) -> MatchResult {
    r.channel = Channel::Union;
    r
}

fn merge_pair(syntax: MatchResult, cfg: MatchResult) -> MatchResult {
    let mut evidence = super::MatchEvidence {
        sharing_matched: syntax.evidence.sharing_matched,
        sharing_total: syntax.evidence.sharing_total,
        unique_matched: syntax.evidence.unique_matched,
        unique_total: syntax.evidence.unique_total,
        cfg_similarity: cfg.evidence.cfg_similarity.or(syntax.evidence.cfg_similarity),
        version_conflict: syntax
            .evidence
            .version_conflict
            .clone()
            .or(cfg.evidence.version_conflict.clone()),
    };

    let version = match (&syntax.version, &cfg.version) {
        (None, None) => None,
        (Some(v), None) | (None, Some(v)) => Some(v.clone()),
        (Some(a), Some(b)) if a == b => Some(a.clone()),
        (Some(a), Some(b)) => {
            // Differing concrete versions: the higher-scoring channel
            // wins; keep a note about the loser.
            let (winner, loser, loser_channel) = if syntax.score >= cfg.score {
                (a.clone(), b, "cfg")
            } else {
                (b.clone(), a, "syntax")
            };
            evidence.version_conflict =
                Some(format!("{loser_channel} channel preferred version {loser}"));
            Some(winner)
        }
    };

    MatchResult {
        tpc: syntax.tpc,
        version,
        channel: Channel::Union,
        score: syntax.score.max(cfg.score),
        evidence,
    }
}

/// Union the syntactic and CFG result sets by TPC name.
///
/// A concrete version beats UNKNOWN; equal concrete versions agree;
/// differing concrete versions resolve to the higher-scoring channel
/// with a conflict note. Output is sorted by TPC name and never repeats
/// a name.
pub fn union_merge(r_syntax: Vec<MatchResult>, r_cfg: Vec<MatchResult>) -> Vec<MatchResult> {
    let mut by_name: BTreeMap<String, (Option<MatchResult>, Option<MatchResult>)> = BTreeMap::new();
    for r in r_syntax {
        let key = r.tpc.clone();
        by_name.entry(key).or_default().0 = Some(r);
    }
    for r in r_cfg {
        let key = r.tpc.clone();
        by_name.entry(key).or_default().1 = Some(r);
    }
    by_name
        .into_values()
        .map(|pair| match pair {
            (Some(s), Some(c)) => merge_pair(s, c),
            (Some(s), None) => relabel(s),
            (None, Some(c)) => relabel(c),
            (None, None) => unreachable!("entry created without a result"),
        })
        .collect()
}
