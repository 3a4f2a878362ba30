//! CVE records, the flat ingest schema, and version-range membership.

use std::cmp::Ordering;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::version::compare_versions;

#[derive(Debug, Error)]
pub enum CveError {
    /// The feed document is not parseable at all.
    #[error("feed schema error: {0}")]
    SchemaError(String),
}

/// An inclusive version range, or an explicit version list.
///
/// At least one bound (or a non-empty `exact` list) must be present.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionRange {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start_incl: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub end_incl: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub exact: Vec<String>,
}

impl VersionRange {
    pub fn is_well_formed(&self) -> bool {
        self.start_incl.is_some() || self.end_incl.is_some() || !self.exact.is_empty()
    }

    pub fn contains(&self, version: &str) -> bool {
        if !self.exact.is_empty() {
            return self
                .exact
                .iter()
                .any(|v| compare_versions(v, version) == Ordering::Equal);
        }
        let lower_ok = self
            .start_incl
            .as_deref()
            .map(|s| compare_versions(version, s) != Ordering::Less)
            .unwrap_or(true);
        let upper_ok = self
            .end_incl
            .as_deref()
            .map(|e| compare_versions(version, e) != Ordering::Greater)
            .unwrap_or(true);
        lower_ok && upper_ok
    }
}

/// One vulnerability record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CveRecord {
    /// `CVE-YYYY-NNNN+`.
    pub cve_id: String,
    /// Normalized (lowercase) product name.
    pub product: String,
    pub ranges: Vec<VersionRange>,
    /// CVSS base score in `[0, 10]`.
    pub cvss: f64,
    pub published: NaiveDate,
    #[serde(default)]
    pub description: String,
}

impl CveRecord {
    pub fn affects(&self, version: &str) -> bool {
        self.ranges.iter().any(|r| r.contains(version))
    }
}

fn well_formed_id(id: &str) -> bool {
    let Some(rest) = id.strip_prefix("CVE-") else {
        return false;
    };
    let Some((year, number)) = rest.split_once('-') else {
        return false;
    };
    year.len() == 4
        && year.bytes().all(|b| b.is_ascii_digit())
        && number.len() >= 4
        && number.bytes().all(|b| b.is_ascii_digit())
}

/// A feed entry that failed validation, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct RejectedEntry {
    pub cve_id: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ImportOutcome {
    pub records: Vec<CveRecord>,
    pub rejects: Vec<RejectedEntry>,
}

fn validate(record: &CveRecord) -> Result<(), String> {
    if !well_formed_id(&record.cve_id) {
        return Err(format!("malformed CVE id {:?}", record.cve_id));
    }
    if record.product.trim().is_empty() {
        return Err("empty product".into());
    }
    if !(0.0..=10.0).contains(&record.cvss) {
        return Err(format!("cvss {} outside [0, 10]", record.cvss));
    }
    if record.ranges.is_empty() {
        return Err("no version ranges".into());
    }
    for r in &record.ranges {
        if !r.is_well_formed() {
            return Err("range with no bound and no exact list".into());
        }
    }
    Ok(())
}

/// Parse a flat JSON feed (a list of records) and validate every entry.
/// Invalid entries land in the rejects list; an unparseable document is a
/// schema error.
pub fn import_cve_feed(feed: &str) -> Result<ImportOutcome, CveError> {
    let raw: Vec<serde_json::Value> =
        serde_json::from_str(feed).map_err(|e| CveError::SchemaError(e.to_string()))?;
    let mut out = ImportOutcome::default();
    for value in raw {
        let id = value
            .get("cve_id")
            .and_then(|v| v.as_str())
            .unwrap_or("<missing id>")
            .to_string();
        match serde_json::from_value::<CveRecord>(value) {
            Ok(mut record) => match validate(&record) {
                Ok(()) => {
                    record.product = normalize_product(&record.product);
                    out.records.push(record);
                }
                Err(reason) => out.rejects.push(RejectedEntry { cve_id: id, reason }),
            },
            Err(e) => out.rejects.push(RejectedEntry {
                cve_id: id,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Product matching is by normalized lowercase name (full CPE URI
/// grammar is out of scope).
pub fn normalize_product(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace([' ', '-'], "_")
}
