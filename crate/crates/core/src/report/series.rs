//! Consecutive-firmware-series analytics: TPC change tracking across
//! updates of one device lineage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tpcdb::TpcDatabase;

use super::{ReportError, ScanReport};

/// One TPC's appearance in one firmware of the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesAppearance {
    pub image_id: String,
    /// Version label (`UNKNOWN` when unresolved).
    pub version: String,
    /// CVEs known for this version, total.
    pub cve_total: usize,
    /// Of those, disclosed before this firmware's release (the
    /// parenthesized count convention).
    pub cve_disclosed_before: usize,
}

/// A TPC tracked across the series with its per-update transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTpcEntry {
    pub tpc: String,
    pub appearances: Vec<SeriesAppearance>,
    /// One entry per consecutive pair in which the TPC appears in both:
    /// `true` when the version changed.
    pub transitions: Vec<bool>,
    pub changed: usize,
    pub unchanged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lineage: Option<String>,
    pub image_ids: Vec<String>,
    pub tpcs: Vec<SeriesTpcEntry>,
}

/// Analyze a series of reports of one device lineage, ordered by
/// firmware release date.
pub fn series_analysis(
    reports: &[ScanReport],
    db: &TpcDatabase,
) -> Result<SeriesReport, ReportError> {
    if reports.len() < 2 {
        return Err(ReportError::InsufficientSeries(format!(
            "got {} report(s)",
            reports.len()
        )));
    }
    let lineage = reports[0].lineage.clone();
    for r in reports {
        if r.lineage != lineage {
            return Err(ReportError::InsufficientSeries(format!(
                "report {} belongs to a different lineage",
                r.image_id
            )));
        }
    }
    if reports
        .windows(2)
        .any(|w| match (w[0].release_date, w[1].release_date) {
            (Some(a), Some(b)) => a > b,
            _ => false,
        })
    {
        return Err(ReportError::InsufficientSeries(
            "reports are not ordered by release date".into(),
        ));
    }

    // tpc -> per-image presence, in series order.
    let mut presence: BTreeMap<String, Vec<Option<SeriesAppearance>>> = BTreeMap::new();
    for (i, report) in reports.iter().enumerate() {
        for m in &report.matches {
            let (cve_total, cve_disclosed_before) = match &m.version {
                Some(version) => {
                    let cves = db.query_cves(&m.tpc, version);
                    let before = match report.release_date {
                        Some(release) => cves.iter().filter(|c| c.published < release).count(),
                        None => 0,
                    };
                    (cves.len(), before)
                }
                None => (0, 0),
            };
            let slot = presence
                .entry(m.tpc.clone())
                .or_insert_with(|| vec![None; reports.len()]);
            slot[i] = Some(SeriesAppearance {
                image_id: report.image_id.clone(),
                version: m.version_label().to_string(),
                cve_total,
                cve_disclosed_before,
            });
        }
    }

    let tpcs = presence
        .into_iter()
        .map(|(tpc, slots)| {
            let transitions: Vec<bool> = slots
                .windows(2)
                .filter_map(|w| match (&w[0], &w[1]) {
                    (Some(a), Some(b)) => Some(a.version != b.version),
                    _ => None,
                })
                .collect();
            let changed = transitions.iter().filter(|&&c| c).count();
            let unchanged = transitions.len() - changed;
            SeriesTpcEntry {
                tpc,
                appearances: slots.into_iter().flatten().collect(),
                transitions,
                changed,
                unchanged,
            }
        })
        .collect();

    Ok(SeriesReport {
        lineage,
        image_ids: reports.iter().map(|r| r.image_id.clone()).collect(),
        tpcs,
    })
}
