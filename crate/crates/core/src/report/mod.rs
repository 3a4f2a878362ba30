//! Audit reports: vulnerability findings, severity buckets, license
//! flags, fix suggestions.

pub mod delay;
pub mod series;

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{FirmwareInfo, ImageMetadata};
use crate::matcher::MatchResult;
use crate::tpcdb::{CveRecord, TpcDatabase};

pub use delay::delay_time;
pub use series::{series_analysis, SeriesReport, SeriesTpcEntry};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cvss {0} outside [0, 10]")]
    OutOfRange(f64),
    #[error("unknown version: {0}")]
    UnknownVersion(String),
    #[error("no version of {0} is dated at or before the firmware release")]
    NoDatedVersions(String),
    #[error("series analysis needs at least two reports of one lineage: {0}")]
    InsufficientSeries(String),
}

/// CVSS severity bucket. Boundaries: critical >= 9.0, high >= 7.0,
/// medium >= 4.0, low below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Critical,
    High,
    Medium,
    Low,
}

pub fn severity_bucket(cvss: f64) -> Result<Severity, ReportError> {
    if !(0.0..=10.0).contains(&cvss) {
        return Err(ReportError::OutOfRange(cvss));
    }
    Ok(if cvss >= 9.0 {
        Severity::Critical
    } else if cvss >= 7.0 {
        Severity::High
    } else if cvss >= 4.0 {
        Severity::Medium
    } else {
        Severity::Low
    })
}

/// One vulnerability attributed to a detected TPC version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub tpc: String,
    pub version: String,
    pub cve: CveRecord,
    pub severity: Severity,
    /// Whether the CVE was public before this firmware shipped; absent
    /// when the image has no release date.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub disclosed_before_release: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityCounts {
    pub critical: usize,
    pub high: usize,
    pub medium: usize,
    pub low: usize,
}

impl SeverityCounts {
    pub fn total(&self) -> usize {
        self.critical + self.high + self.medium + self.low
    }

    pub fn tally(findings: &[Finding]) -> Self {
        let mut counts = SeverityCounts::default();
        for f in findings {
            match f.severity {
                Severity::Critical => counts.critical += 1,
                Severity::High => counts.high += 1,
                Severity::Medium => counts.medium += 1,
                Severity::Low => counts.low += 1,
            }
        }
        counts
    }
}

/// Whether the audited firmware ships with source availability; GPL and
/// AGPL obligations only bite on closed distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    SourceAvailable,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LicenseFlag {
    pub tpc: String,
    pub license: String,
}

/// The per-image audit artifact. JSON is the contract; ordering of every
/// list is deterministic so identical inputs serialize identically
/// (excluding `wall_time_ms`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub image_id: String,
    pub firmware_info: FirmwareInfo,
    pub matches: Vec<MatchResult>,
    pub findings: Vec<Finding>,
    pub severity_counts: SeverityCounts,
    pub license_flags: Vec<LicenseFlag>,
    pub suggestions: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub release_date: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lineage: Option<String>,
    pub wall_time_ms: u64,
}

/// GPL or AGPL license family (LGPL is deliberately not in scope).
fn is_gpl_family(license: &str) -> bool {
    let upper = license.to_ascii_uppercase();
    let base = upper.trim_start_matches("SPDX:").trim();
    base.starts_with("GPL") || base.starts_with("AGPL")
}

/// Output of [`license_check`]: hard flags plus unknown-license warnings.
#[derive(Debug, Default, Clone)]
pub struct LicenseCheckOutput {
    pub flags: Vec<LicenseFlag>,
    pub warnings: Vec<String>,
}

/// Flag matched TPCs whose license family is GPL/AGPL when the firmware
/// is distributed closed. Unknown licenses warn rather than flag.
pub fn license_check(
    matches: &[MatchResult],
    db: &TpcDatabase,
    distribution: Distribution,
) -> LicenseCheckOutput {
    let mut out = LicenseCheckOutput::default();
    if distribution == Distribution::SourceAvailable {
        return out;
    }
    let mut seen = BTreeSet::new();
    for m in matches {
        if !seen.insert(&m.tpc) {
            continue;
        }
        match db.tpc(&m.tpc).and_then(|r| r.license.as_deref()) {
            Some(license) if is_gpl_family(license) => out.flags.push(LicenseFlag {
                tpc: m.tpc.clone(),
                license: license.to_string(),
            }),
            Some(_) => {}
            None => out
                .warnings
                .push(format!("license of {:?} is unknown; review manually", m.tpc)),
        }
    }
    out.flags.sort();
    out
}

/// Assemble the audit report for one image.
///
/// Findings come from the CVE versions check over every match with a
/// concrete version; UNKNOWN-version matches stay listed but contribute
/// no findings. Ordering is (tpc, cve_id).
pub fn build_report(
    image_id: &str,
    firmware_info: FirmwareInfo,
    mut matches: Vec<MatchResult>,
    db: &TpcDatabase,
    distribution: Distribution,
    image_meta: Option<&ImageMetadata>,
    wall_time_ms: u64,
) -> ScanReport {
    let release_date = image_meta.and_then(|m| m.release_date);
    let lineage = image_meta.and_then(|m| m.lineage.clone());
    matches.sort_by(|a, b| a.tpc.cmp(&b.tpc));

    let mut findings = Vec::new();
    let mut suggestions = BTreeSet::new();
    for m in &matches {
        let Some(version) = &m.version else { continue };
        let cves = db.query_cves(&m.tpc, version);
        if cves.is_empty() {
            continue;
        }
        if let Some(record) = db.tpc(&m.tpc) {
            if let Some(latest) = record.latest_version() {
                if latest.version != *version {
                    suggestions.insert(format!(
                        "upgrade {} {} -> {}",
                        m.tpc, version, latest.version
                    ));
                }
            }
        }
        for cve in cves {
            let severity = severity_bucket(cve.cvss).unwrap_or(Severity::Low);
            findings.push(Finding {
                tpc: m.tpc.clone(),
                version: version.clone(),
                severity,
                disclosed_before_release: release_date.map(|d| cve.published < d),
                cve: cve.clone(),
            });
        }
    }
    findings.sort_by(|a, b| (&a.tpc, &a.cve.cve_id).cmp(&(&b.tpc, &b.cve.cve_id)));

    let license = license_check(&matches, db, distribution);
    let severity_counts = SeverityCounts::tally(&findings);

    ScanReport {
        image_id: image_id.to_string(),
        firmware_info,
        matches,
        findings,
        severity_counts,
        license_flags: license.flags,
        suggestions: suggestions.into_iter().collect(),
        warnings: license.warnings,
        release_date,
        lineage,
        wall_time_ms,
    }
}

impl ScanReport {
    /// Referential-integrity and count reconciliation checks, applied to
    /// every emitted report.
    pub fn validate(&self) -> Result<(), String> {
        if self.severity_counts != SeverityCounts::tally(&self.findings) {
            return Err("severity counts do not reconcile with findings".into());
        }
        if self.severity_counts.total() != self.findings.len() {
            return Err("severity counts do not sum to the finding count".into());
        }
        let names: BTreeSet<&str> = self.matches.iter().map(|m| m.tpc.as_str()).collect();
        for f in &self.findings {
            if !names.contains(f.tpc.as_str()) {
                return Err(format!("finding for {:?} has no matching TPC entry", f.tpc));
            }
        }
        for flag in &self.license_flags {
            if !names.contains(flag.tpc.as_str()) {
                return Err(format!("license flag for {:?} has no matching TPC entry", flag.tpc));
            }
        }
        Ok(())
    }

    /// Plain-text summary; the JSON document remains the contract.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("image: {}\n", self.image_id));
        out.push_str(&format!(
            "class: {:?}, arch: {}, filesystem: {:?}, entropy {:.2}\n",
            self.firmware_info.os_class,
            self.firmware_info.arch,
            self.firmware_info.filesystem,
            self.firmware_info.entropy_mean,
        ));
        out.push_str(&format!("TPCs detected: {}\n", self.matches.len()));
        for m in &self.matches {
            out.push_str(&format!(
                "  {} {} (score {:.3})\n",
                m.tpc,
                m.version_label(),
                m.score
            ));
        }
        out.push_str(&format!(
            "vulnerabilities: {} (critical {}, high {}, medium {}, low {})\n",
            self.severity_counts.total(),
            self.severity_counts.critical,
            self.severity_counts.high,
            self.severity_counts.medium,
            self.severity_counts.low,
        ));
        for f in &self.findings {
            out.push_str(&format!(
                "  {} {} {} ({:?}, cvss {:.1})\n",
                f.cve.cve_id, f.tpc, f.version, f.severity, f.cve.cvss
            ));
        }
        for flag in &self.license_flags {
            out.push_str(&format!("license flag: {} ({})\n", flag.tpc, flag.license));
        }
        for s in &self.suggestions {
            out.push_str(&format!("suggestion: {s}\n"));
        }
        out
    }
}
