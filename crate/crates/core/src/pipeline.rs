//! End-to-end scan of one firmware image: filter, carve, extract,
//! classify, feature-extract, match, report.

use sha2::{Digest, Sha256};

use crate::binfeat::{
    features_from_blob, features_from_elf, parse_elf, Acfg, BinaryFeatures,
};
use crate::extraction::{
    decompress_gzip, extract_filesystem, filter_candidate, identify_firmware_with,
    scan_signatures, CarvedRegion, ExtractedObject, ExtractionManifest, FirmwareImage,
    IdentifyConfig, ManifestObject, ObjectKind, OsClass, RegionKind,
};
use crate::matcher::{
    cfg_match, syntactic_match, union_merge, CfgMatchConfig, MatchResult, Thresholds,
};
use crate::report::{build_report, Distribution, ScanReport};
use crate::tpcdb::TpcDatabase;

/// Everything a scan needs beyond the image and the database.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub thresholds: Thresholds,
    pub min_string_len: usize,
    pub embed_iterations: usize,
    /// Nested-container recursion budget.
    pub recursion_depth: usize,
    pub identify: IdentifyConfig,
    pub distribution: Distribution,
    pub prune_block_band: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            thresholds: Thresholds::default(),
            min_string_len: crate::binfeat::DEFAULT_MIN_STRING_LEN,
            embed_iterations: crate::matcher::DEFAULT_EMBED_ITERATIONS,
            recursion_depth: 3,
            identify: IdentifyConfig::default(),
            distribution: Distribution::Closed,
            prune_block_band: true,
        }
    }
}

/// Scan result: the audit report, the extraction manifest, and the
/// extracted files (for mirroring to disk).
#[derive(Debug)]
pub struct ScanOutcome {
    pub report: ScanReport,
    pub manifest: ExtractionManifest,
    pub objects: Vec<ExtractedObject>,
}

fn explore(
    bytes: &[u8],
    depth: usize,
    config: &ScanConfig,
    objects: &mut Vec<ExtractedObject>,
    warnings: &mut Vec<String>,
) -> Vec<CarvedRegion> {
    let regions = scan_signatures(bytes);
    for region in &regions {
        let slice = &bytes[region.offset..region.offset + region.length];
        match region.kind {
            RegionKind::Cpio | RegionKind::Tar | RegionKind::Squashfs => {
                match extract_filesystem(slice, region.kind) {
                    Ok(output) => {
                        warnings.extend(output.warnings);
                        for mut obj in output.objects {
                            if objects.iter().any(|o| o.path == obj.path) {
                                obj.path = format!("region_{:x}/{}", region.offset, obj.path);
                            }
                            objects.push(obj);
                        }
                    }
                    Err(e) => warnings.push(format!(
                        "extraction of {:?} region at {:#x} failed: {e}",
                        region.kind, region.offset
                    )),
                }
            }
            RegionKind::Gzip => {
                if depth < config.recursion_depth {
                    match decompress_gzip(slice) {
                        Ok(inner) => {
                            explore(&inner, depth + 1, config, objects, warnings);
                        }
                        Err(e) => warnings.push(format!(
                            "gzip region at {:#x} failed to decompress: {e}",
                            region.offset
                        )),
                    }
                } else {
                    warnings.push(format!(
                        "recursion budget exhausted at gzip region {:#x}",
                        region.offset
                    ));
                }
            }
            _ => {}
        }
    }
    regions
}

/// Extract syntactic features and ACFGs from everything recovered.
fn gather_features(
    image: &FirmwareImage,
    objects: &[ExtractedObject],
    os_class: OsClass,
    config: &ScanConfig,
) -> BinaryFeatures {
    let mut features = BinaryFeatures::default();
    for obj in objects {
        match obj.kind {
            ObjectKind::ElfBinary => match parse_elf(&obj.bytes) {
                Ok(elf) => {
                    features.merge(features_from_elf(&obj.bytes, &elf, config.min_string_len))
                }
                Err(_) => {
                    features.strings.extend(crate::binfeat::extract_strings(
                        &obj.bytes,
                        config.min_string_len,
                    ));
                }
            },
            ObjectKind::Text | ObjectKind::Data => {
                features
                    .strings
                    .extend(crate::binfeat::extract_strings(&obj.bytes, config.min_string_len));
            }
        }
    }
    if objects.is_empty() {
        match os_class {
            OsClass::Monolithic => {
                features.merge(features_from_blob(
                    &image.bytes,
                    config.identify.load_base,
                    config.min_string_len,
                ));
            }
            OsClass::Encrypted => {}
            _ => {
                features
                    .strings
                    .extend(crate::binfeat::extract_strings(&image.bytes, config.min_string_len));
            }
        }
    }
    features
}

/// Run the two matching channels and union the results.
pub fn match_features(
    db: &TpcDatabase,
    features: &BinaryFeatures,
    config: &ScanConfig,
) -> Vec<MatchResult> {
    let cfg_config = CfgMatchConfig {
        embed_iterations: config.embed_iterations,
        prune_block_band: config.prune_block_band,
    };
    let r_syntax = syntactic_match(db, features, &config.thresholds);
    let r_cfg = cfg_match(db, &features.acfgs, &config.thresholds, &cfg_config);
    union_merge(r_syntax, r_cfg)
}

fn manifest_for(
    image: &FirmwareImage,
    info: &crate::extraction::FirmwareInfo,
    regions: &[CarvedRegion],
    objects: &[ExtractedObject],
    warnings: &[String],
) -> ExtractionManifest {
    ExtractionManifest {
        image_id: image.id.clone(),
        info: info.clone(),
        regions: regions.to_vec(),
        objects: objects
            .iter()
            .map(|o| ManifestObject {
                path: o.path.clone(),
                sha256: hex_digest(&o.bytes),
                size: o.bytes.len(),
                kind: o.kind,
            })
            .collect(),
        warnings: warnings.to_vec(),
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Scan one image against the database. `extra_acfgs` lets external
/// disassemblers feed graphs for ISAs the built-in decoder does not
/// cover.
pub fn scan_image(
    image: &FirmwareImage,
    db: &TpcDatabase,
    config: &ScanConfig,
    extra_acfgs: Vec<Acfg>,
) -> ScanOutcome {
    let started = std::time::Instant::now();
    let mut warnings = Vec::new();
    let mut objects = Vec::new();

    let decision = filter_candidate(&image.name, &image.bytes);
    let regions = if decision.accepted() {
        explore(&image.bytes, 0, config, &mut objects, &mut warnings)
    } else {
        warnings.push(format!("candidate rejected by filter: {decision:?}"));
        Vec::new()
    };

    let info = identify_firmware_with(&config.identify, image, &regions, &objects);

    let matches = if decision.accepted() && info.os_class != OsClass::Encrypted {
        let mut features = gather_features(image, &objects, info.os_class, config);
        if !extra_acfgs.is_empty() {
            features.merge(BinaryFeatures {
                acfgs: extra_acfgs,
                ..Default::default()
            });
        }
        match_features(db, &features, config)
    } else {
        Vec::new()
    };

    let manifest = manifest_for(image, &info, &regions, &objects, &warnings);
    let mut report = build_report(
        &image.id,
        info,
        matches,
        db,
        config.distribution,
        image.metadata.as_ref(),
        started.elapsed().as_millis() as u64,
    );
    report.warnings.extend(warnings);
    debug_assert!(report.validate().is_ok());

    ScanOutcome {
        report,
        manifest,
        objects,
    }
}
