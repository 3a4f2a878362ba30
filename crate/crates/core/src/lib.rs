//! Core library of `firmsca`, a firmware software-composition-analysis toolkit.
//!
//! The pipeline identifies third-party components (TPCs) inside firmware
//! images at version granularity and maps the detected versions to known
//! CVEs. It is organized along the stages of a scan:
//!
//! * [`extraction`] - candidate filtering, magic-signature carving,
//!   filesystem extraction (CPIO, TAR, SquashFS v4 + zlib) and image
//!   classification (Linux-based / monolithic / encrypted).
//! * [`binfeat`] - syntactic feature extraction (string literals, function
//!   names) and attributed control-flow graph (ACFG) recovery, including an
//!   ELF parser and an RV32I disassembler for monolithic blobs.
//! * [`tpcdb`] - the component database: per-version sharing/unique
//!   syntactic signatures, ACFG sets, licenses, release dates, and CVE
//!   records with version ranges.
//! * [`matcher`] - the two detection channels (edit-distance syntactic
//!   matching and complexity-weighted ACFG similarity), their union,
//!   threshold tuning, and precision/recall evaluation.
//! * [`report`] - vulnerability findings, severity bucketing, license
//!   flags, update-delay metrics, and firmware-series analytics.
//! * [`pipeline`] - glue that runs a whole image through the stages above.
//!
//! Scores, similarities, and weights are computed by scalar-generic kernels
//! (see [`num::Scalar`]); the concrete scalar used throughout the pipeline
//! is the [`Real`] alias below.

pub mod binfeat;
pub mod extraction;
pub mod matcher;
pub mod num;
pub mod pipeline;
pub mod report;
pub mod tpcdb;

/// Concrete scalar type used by the pipeline for scores and similarities.
pub type Real = f64;

pub use binfeat::{Acfg, BinaryFeatures, BlockAttr};
pub use extraction::{CarvedRegion, ExtractedObject, FirmwareImage, FirmwareInfo};
pub use matcher::{MatchResult, Thresholds};
pub use report::{Finding, ScanReport};
pub use tpcdb::{CveRecord, TpcDatabase, TpcRecord, VersionSignature};
