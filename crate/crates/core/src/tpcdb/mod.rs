//! The TPC database: per-version syntactic signatures, ACFG sets,
//! licenses, release dates, and CVE records.
//!
//! On disk a database is a directory:
//!
//! ```text
//! db/
//!   index.json        { "schema_version": 1, "tpcs": ["openssl", ...] }
//!   cves.json         [ CveRecord, ... ]
//!   tpcs/<name>.json  TpcRecord
//! ```
//!
//! All dates are ISO-8601, all text UTF-8. The database is immutable
//! after load; building is single-writer.

pub mod cve;
pub mod lexer;
pub mod version;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binfeat::Acfg;

pub use cve::{import_cve_feed, CveError, CveRecord, ImportOutcome, VersionRange};
pub use lexer::{lex_source_features, SourceFeatures};
pub use version::{compare_versions, versions_equal};

pub const SCHEMA_VERSION: u32 = 1;

/// Marker used in reports for matches whose version could not be pinned.
pub const UNKNOWN_VERSION: &str = "UNKNOWN";

#[derive(Debug, Error)]
pub enum DbError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("schema version {0} is newer than this build understands")]
    SchemaVersion(u32),
    #[error("invalid record: {0}")]
    Invalid(String),
}

/// One version's signature material.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VersionSignature {
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub release_date: Option<NaiveDate>,
    /// All string literals of this version.
    pub strings: BTreeSet<String>,
    /// All function signatures `name(paramtypes)` of this version.
    pub functions: BTreeSet<String>,
    /// Record-level sharing sets, duplicated per version for lookup.
    #[serde(default)]
    pub sharing_strings: BTreeSet<String>,
    #[serde(default)]
    pub sharing_functions: BTreeSet<String>,
    /// Features present in exactly this version.
    #[serde(default)]
    pub unique_strings: BTreeSet<String>,
    #[serde(default)]
    pub unique_functions: BTreeSet<String>,
    #[serde(default)]
    pub acfgs: Vec<Acfg>,
}

impl VersionSignature {
    pub fn new(version: impl Into<String>) -> Self {
        VersionSignature {
            version: version.into(),
            ..Default::default()
        }
    }
}

/// A third-party component with all its versions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TpcRecord {
    pub name: String,
    /// SPDX-style license expression when known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub license: Option<String>,
    pub versions: Vec<VersionSignature>,
    /// CVE product name when it differs from `name`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cpe_product: Option<String>,
}

impl TpcRecord {
    pub fn new(name: impl Into<String>) -> Self {
        TpcRecord {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn version(&self, version: &str) -> Option<&VersionSignature> {
        self.versions.iter().find(|v| v.version == version)
    }

    /// Product name used for CVE queries.
    pub fn product(&self) -> String {
        cve::normalize_product(self.cpe_product.as_deref().unwrap_or(&self.name))
    }

    /// Latest version by the version ordering, regardless of dates.
    pub fn latest_version(&self) -> Option<&VersionSignature> {
        self.versions
            .iter()
            .max_by(|a, b| compare_versions(&a.version, &b.version))
    }

    /// Re-derive the sharing and unique sets from the raw per-version
    /// features. Called whenever the version list changes.
    pub fn recompute_signature_sets(&mut self) {
        let inputs: Vec<(BTreeSet<String>, BTreeSet<String>)> = self
            .versions
            .iter()
            .map(|v| (v.strings.clone(), v.functions.clone()))
            .collect();
        let derived = derive_signature_sets(&inputs);
        for (v, d) in self.versions.iter_mut().zip(derived) {
            v.sharing_strings = d.sharing_strings;
            v.sharing_functions = d.sharing_functions;
            v.unique_strings = d.unique_strings;
            v.unique_functions = d.unique_functions;
        }
    }

    pub fn validate(&self) -> Result<(), DbError> {
        if self.name.trim().is_empty() {
            return Err(DbError::Invalid("TPC name must be non-empty".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &self.versions {
            if !seen.insert(&v.version) {
                return Err(DbError::Invalid(format!(
                    "duplicate version {:?} in {:?}",
                    v.version, self.name
                )));
            }
        }
        Ok(())
    }
}

/// Result of [`derive_signature_sets`] for one version.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignatureSets {
    pub sharing_strings: BTreeSet<String>,
    pub sharing_functions: BTreeSet<String>,
    pub unique_strings: BTreeSet<String>,
    pub unique_functions: BTreeSet<String>,
}

/// Sharing features are the intersection over all versions; a version's
/// unique features are the ones appearing in no other version. Strings
/// and functions derive independently.
pub fn derive_signature_sets(
    versions: &[(BTreeSet<String>, BTreeSet<String>)],
) -> Vec<SignatureSets> {
    fn derive(sets: &[&BTreeSet<String>]) -> (BTreeSet<String>, Vec<BTreeSet<String>>) {
        let sharing = sets
            .iter()
            .skip(1)
            .fold(sets.first().map(|s| (*s).clone()).unwrap_or_default(), |acc, s| {
                acc.intersection(s).cloned().collect()
            });
        let uniques = (0..sets.len())
            .map(|i| {
                let mut unique = sets[i].clone();
                for (j, other) in sets.iter().enumerate() {
                    if i != j {
                        unique = unique.difference(other).cloned().collect();
                    }
                }
                unique
            })
            .collect();
        (sharing, uniques)
    }

    let string_sets: Vec<&BTreeSet<String>> = versions.iter().map(|(s, _)| s).collect();
    let function_sets: Vec<&BTreeSet<String>> = versions.iter().map(|(_, f)| f).collect();
    let (sharing_strings, unique_strings) = derive(&string_sets);
    let (sharing_functions, unique_functions) = derive(&function_sets);

    unique_strings
        .into_iter()
        .zip(unique_functions)
        .map(|(us, uf)| SignatureSets {
            sharing_strings: sharing_strings.clone(),
            sharing_functions: sharing_functions.clone(),
            unique_strings: us,
            unique_functions: uf,
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct DbIndex {
    schema_version: u32,
    tpcs: Vec<String>,
}

/// In-memory database. Keys are normalized TPC names.
#[derive(Debug, Clone, Default)]
pub struct TpcDatabase {
    pub tpcs: BTreeMap<String, TpcRecord>,
    pub cves: Vec<CveRecord>,
}

impl TpcDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace a record. Signature sets are recomputed.
    pub fn upsert_tpc(&mut self, mut record: TpcRecord) -> Result<(), DbError> {
        record.validate()?;
        record.recompute_signature_sets();
        self.tpcs.insert(cve::normalize_product(&record.name), record);
        Ok(())
    }

    pub fn tpc(&self, name: &str) -> Option<&TpcRecord> {
        self.tpcs.get(&cve::normalize_product(name))
    }

    pub fn import_cves(&mut self, records: Vec<CveRecord>) {
        self.cves.extend(records);
        self.cves.sort_by(|a, b| a.cve_id.cmp(&b.cve_id));
        self.cves.dedup_by(|a, b| a.cve_id == b.cve_id && a.product == b.product);
    }

    /// Every CVE affecting `version` of the named TPC, sorted by id.
    /// Unknown TPCs and unresolvable version strings yield an empty list
    /// (with a log warning), never an error.
    pub fn query_cves(&self, tpc_name: &str, version: &str) -> Vec<&CveRecord> {
        if version.is_empty() || version.eq_ignore_ascii_case(UNKNOWN_VERSION) {
            log::warn!("cve query for {tpc_name:?} with unresolved version");
            return Vec::new();
        }
        let product = match self.tpc(tpc_name) {
            Some(record) => record.product(),
            None => {
                log::warn!("cve query for unknown TPC {tpc_name:?}");
                return Vec::new();
            }
        };
        let mut hits: Vec<&CveRecord> = self
            .cves
            .iter()
            .filter(|c| c.product == product && c.affects(version))
            .collect();
        hits.sort_by(|a, b| a.cve_id.cmp(&b.cve_id));
        hits
    }

    pub fn save(&self, dir: &Path) -> Result<(), DbError> {
        std::fs::create_dir_all(dir.join("tpcs"))?;
        let index = DbIndex {
            schema_version: SCHEMA_VERSION,
            tpcs: self.tpcs.keys().cloned().collect(),
        };
        std::fs::write(dir.join("index.json"), serde_json::to_vec_pretty(&index)?)?;
        std::fs::write(dir.join("cves.json"), serde_json::to_vec_pretty(&self.cves)?)?;
        for (key, record) in &self.tpcs {
            std::fs::write(
                dir.join("tpcs").join(format!("{key}.json")),
                serde_json::to_vec_pretty(record)?,
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, DbError> {
        let index: DbIndex = serde_json::from_slice(&std::fs::read(dir.join("index.json"))?)?;
        if index.schema_version > SCHEMA_VERSION {
            return Err(DbError::SchemaVersion(index.schema_version));
        }
        let mut db = TpcDatabase::new();
        let cve_path = dir.join("cves.json");
        if cve_path.exists() {
            db.cves = serde_json::from_slice(&std::fs::read(cve_path)?)?;
        }
        for key in index.tpcs {
            let record: TpcRecord =
                serde_json::from_slice(&std::fs::read(dir.join("tpcs").join(format!("{key}.json")))?)?;
            record.validate()?;
            db.tpcs.insert(key, record);
        }
        Ok(db)
    }
}
