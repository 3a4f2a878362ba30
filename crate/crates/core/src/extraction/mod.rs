//! Firmware candidate filtering, signature carving, filesystem
//! extraction, and image classification.

pub mod cpio;
pub mod entropy;
pub mod signatures;
pub mod squashfs;
pub mod tar;

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binfeat::{parse_elf, valid_instruction_ratio, Arch};

pub use entropy::mean_entropy;
pub use signatures::{scan_signatures, CarvedRegion, RegionKind};

#[derive(Debug, Error)]
pub enum ExtractionError {
    /// The container header claims more data than the region holds.
    #[error("truncated image: {0}")]
    TruncatedImage(String),
    /// Identification succeeded but this dialect is not extractable.
    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),
    /// Structural or checksum violation.
    #[error("malformed archive: {0}")]
    MalformedArchive(String),
}

/// A raw firmware image under analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirmwareImage {
    /// Unique within a scan batch.
    pub id: String,
    pub name: String,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub bytes: Vec<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metadata: Option<ImageMetadata>,
}

/// Sidecar metadata crawled with an image, when known.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ImageMetadata {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vendor: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub category: Option<String>,
    /// ISO-8601 release date.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub release_date: Option<chrono::NaiveDate>,
    /// Device lineage identifier for consecutive-series analysis.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lineage: Option<String>,
}

/// Rough content class of an extracted file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    ElfBinary,
    Text,
    Data,
}

/// One file recovered from a filesystem region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractedObject {
    /// Filesystem-style path, unique within one image's extraction tree.
    pub path: String,
    pub bytes: Vec<u8>,
    pub kind: ObjectKind,
}

/// Files plus the non-fatal skip records produced while reading an
/// archive.
#[derive(Debug, Default)]
pub struct ExtractionOutput {
    pub objects: Vec<ExtractedObject>,
    pub warnings: Vec<String>,
}

pub fn classify_object(bytes: &[u8]) -> ObjectKind {
    if bytes.starts_with(b"\x7fELF") {
        return ObjectKind::ElfBinary;
    }
    let probe = &bytes[..bytes.len().min(4096)];
    let printable = probe
        .iter()
        .filter(|&&b| (0x20..=0x7e).contains(&b) || b == b'\n' || b == b'\r' || b == b'\t')
        .count();
    if !probe.is_empty() && printable * 100 >= probe.len() * 95 {
        ObjectKind::Text
    } else {
        ObjectKind::Data
    }
}

/// Operating-system class of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OsClass {
    LinuxBased,
    Monolithic,
    Encrypted,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilesystemKind {
    Squashfs,
    Cramfs,
    Jffs2,
    Cpio,
    Tar,
    None,
    Unknown,
}

/// Classification of one image: OS class, architecture, filesystem, and
/// the mean entropy the decision was based on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmwareInfo {
    pub os_class: OsClass,
    pub arch: Arch,
    pub filesystem: FilesystemKind,
    pub entropy_mean: f64,
}

/// Why a candidate was rejected by [`filter_candidate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "detail")]
pub enum FilterReason {
    /// File-name suffix on the non-firmware list.
    Suffix(String),
    /// Content identifies as a non-firmware type.
    ContentType(String),
    /// Empty input.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterDecision {
    Accept,
    Reject(FilterReason),
}

impl FilterDecision {
    pub fn accepted(&self) -> bool {
        matches!(self, FilterDecision::Accept)
    }
}

/// Suffixes and content probes that mark obvious non-firmware files.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub reject_suffixes: Vec<&'static str>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            reject_suffixes: vec![
                "txt", "text", "md", "rtf", "html", "htm", "css", "js", "pdf", "doc", "docx",
                "xls", "xlsx", "ppt", "pptx", "csv", "jpg", "jpeg", "png", "gif", "bmp", "ico",
                "svg", "mp3", "wav", "mp4", "avi", "mov",
            ],
        }
    }
}

/// Accept or reject a scan candidate by suffix and content type.
/// Total: never errors; empty input rejects with its own reason.
pub fn filter_candidate(name: &str, bytes: &[u8]) -> FilterDecision {
    filter_candidate_with(&FilterConfig::default(), name, bytes)
}

pub fn filter_candidate_with(cfg: &FilterConfig, name: &str, bytes: &[u8]) -> FilterDecision {
    if bytes.is_empty() {
        return FilterDecision::Reject(FilterReason::Empty);
    }
    if let Some((_, suffix)) = name.rsplit_once('.') {
        let lower = suffix.to_ascii_lowercase();
        if cfg.reject_suffixes.iter().any(|s| *s == lower) {
            return FilterDecision::Reject(FilterReason::Suffix(lower));
        }
    }
    if let Some(kind) = non_firmware_content(bytes) {
        return FilterDecision::Reject(FilterReason::ContentType(kind.to_string()));
    }
    FilterDecision::Accept
}

fn non_firmware_content(bytes: &[u8]) -> Option<&'static str> {
    if bytes.starts_with(b"%PDF-") {
        return Some("pdf");
    }
    let head = &bytes[..bytes.len().min(256)];
    let lower: Vec<u8> = head.to_ascii_lowercase();
    if lower.starts_with(b"<!doctype html") || lower.starts_with(b"<html") {
        return Some("html");
    }
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        return Some("png");
    }
    if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        return Some("jpeg");
    }
    if bytes.starts_with(b"GIF87a") || bytes.starts_with(b"GIF89a") {
        return Some("gif");
    }
    // Plain text: printable/whitespace throughout the probe window with
    // no firmware signature anywhere in it.
    let window = &bytes[..bytes.len().min(4096)];
    let texty = window
        .iter()
        .all(|&b| (0x20..=0x7e).contains(&b) || matches!(b, b'\n' | b'\r' | b'\t'));
    if texty && signatures::scan_signatures(window).is_empty() {
        return Some("plain_text");
    }
    None
}

/// Dispatch extraction of one carved filesystem region.
///
/// Only CPIO (newc), TAR (ustar), and SquashFS v4 + zlib are extractable;
/// other kinds identify but refuse extraction.
pub fn extract_filesystem(
    bytes: &[u8],
    kind: RegionKind,
) -> Result<ExtractionOutput, ExtractionError> {
    match kind {
        RegionKind::Cpio => cpio::extract_cpio(bytes),
        RegionKind::Tar => tar::extract_tar(bytes),
        RegionKind::Squashfs => squashfs::extract_squashfs(bytes),
        other => Err(ExtractionError::UnsupportedVariant(format!(
            "no extractor for {other:?} regions"
        ))),
    }
}

/// Thresholds for the classification heuristics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifyConfig {
    /// Mean entropy at or above which an unrecognized image counts as
    /// encrypted (bits/byte).
    pub entropy_ceiling: f64,
    /// Fraction of aligned words that must decode for the monolithic
    /// probe to pass.
    pub min_valid_instr_ratio: f64,
    /// Load base assumed for monolithic blobs.
    pub load_base: u64,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            entropy_ceiling: 7.0,
            min_valid_instr_ratio: 0.70,
            load_base: 0,
        }
    }
}

fn filesystem_kind(kind: RegionKind) -> FilesystemKind {
    match kind {
        RegionKind::Squashfs => FilesystemKind::Squashfs,
        RegionKind::Cramfs => FilesystemKind::Cramfs,
        RegionKind::Jffs2 => FilesystemKind::Jffs2,
        RegionKind::Cpio => FilesystemKind::Cpio,
        RegionKind::Tar => FilesystemKind::Tar,
        _ => FilesystemKind::None,
    }
}

/// Classify an image from its carved regions and extracted objects.
///
/// Linux-based iff a supported filesystem region was found; monolithic
/// iff nothing was recognized, the entropy stays under the ceiling, and
/// the decode probe passes; encrypted iff the entropy reaches the ceiling
/// with nothing recognized. Architecture comes from extracted ELF
/// headers when present, else from the decode probe.
pub fn identify_firmware(
    image: &FirmwareImage,
    regions: &[CarvedRegion],
    objects: &[ExtractedObject],
) -> FirmwareInfo {
    identify_firmware_with(&IdentifyConfig::default(), image, regions, objects)
}

pub fn identify_firmware_with(
    cfg: &IdentifyConfig,
    image: &FirmwareImage,
    regions: &[CarvedRegion],
    objects: &[ExtractedObject],
) -> FirmwareInfo {
    let entropy_mean = mean_entropy(&image.bytes);
    let fs_region = regions.iter().find(|r| r.kind.is_filesystem());

    // Architecture vote across extracted ELF objects.
    let mut arch_votes: BTreeMap<u8, (usize, Arch)> = BTreeMap::new();
    for obj in objects.iter().filter(|o| o.kind == ObjectKind::ElfBinary) {
        if let Ok(elf) = parse_elf(&obj.bytes) {
            if elf.arch != Arch::Unknown {
                let entry = arch_votes.entry(elf.arch as u8).or_insert((0, elf.arch));
                entry.0 += 1;
            }
        }
    }
    let elf_arch = arch_votes
        .values()
        .max_by_key(|(count, _)| *count)
        .map(|&(_, arch)| arch);

    if let Some(region) = fs_region {
        return FirmwareInfo {
            os_class: OsClass::LinuxBased,
            arch: elf_arch.unwrap_or(Arch::Unknown),
            filesystem: filesystem_kind(region.kind),
            entropy_mean,
        };
    }

    let recognized_anything = !regions.is_empty();
    if entropy_mean >= cfg.entropy_ceiling && !recognized_anything {
        return FirmwareInfo {
            os_class: OsClass::Encrypted,
            arch: Arch::Unknown,
            filesystem: FilesystemKind::None,
            entropy_mean,
        };
    }

    if entropy_mean < cfg.entropy_ceiling {
        let ratio = valid_instruction_ratio(&image.bytes);
        if ratio >= cfg.min_valid_instr_ratio {
            return FirmwareInfo {
                os_class: OsClass::Monolithic,
                arch: elf_arch.unwrap_or(Arch::Riscv32),
                filesystem: FilesystemKind::None,
                entropy_mean,
            };
        }
    }

    FirmwareInfo {
        os_class: OsClass::Unknown,
        arch: elf_arch.unwrap_or(Arch::Unknown),
        filesystem: FilesystemKind::Unknown,
        entropy_mean,
    }
}

/// Inflate one gzip member. Used when recursing into compressed regions.
pub fn decompress_gzip(bytes: &[u8]) -> Result<Vec<u8>, ExtractionError> {
    let mut out = Vec::new();
    flate2::read::GzDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| ExtractionError::MalformedArchive(format!("gzip stream: {e}")))?;
    Ok(out)
}

/// Manifest entry for one extracted file: path, content hash, size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestObject {
    pub path: String,
    pub sha256: String,
    pub size: usize,
    pub kind: ObjectKind,
}

/// JSON extraction manifest for one image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionManifest {
    pub image_id: String,
    pub info: FirmwareInfo,
    pub regions: Vec<CarvedRegion>,
    pub objects: Vec<ManifestObject>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}
