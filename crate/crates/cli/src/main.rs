//! Batch front end for the firmware auditing pipeline: database
//! build/import, scanning, threshold tuning, evaluation, and
//! firmware-series analytics.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use firmsca_core::binfeat::import_acfgs;
use firmsca_core::extraction::{FirmwareImage, ImageMetadata};
use firmsca_core::matcher::{evaluate, tune_thresholds, LabeledImage, MatchResult};
use firmsca_core::pipeline::{scan_image, ScanOutcome};
use firmsca_core::report::{series_analysis, ScanReport};
use firmsca_core::tpcdb::{import_cve_feed, lex_source_features, TpcDatabase, VersionSignature};

use config::Config;

const EX_FINDINGS: u8 = 2;
const EX_USAGE: u8 = 64;
const EX_IOERR: u8 = 74;

#[derive(Parser)]
#[command(name = "firmsca", version, about = "Firmware software-composition analysis")]
struct Cli {
    /// Configuration file (JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// TPC database directory (env FIRMSCA_DB, default ./tpcdb).
    #[arg(long, global = true)]
    db: Option<PathBuf>,
    /// Feature-similarity threshold.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Matched-ratio threshold.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Aggregate CFG-similarity threshold.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or extend the TPC database.
    Db {
        #[command(subcommand)]
        action: DbCommand,
    },
    /// Scan firmware images and emit audit reports.
    Scan(ScanArgs),
    /// Grid-search thresholds on a labeled manifest.
    Tune {
        /// JSON list of labeled images (features + ground truth).
        manifest: PathBuf,
        /// Grid step for each threshold axis.
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
    },
    /// Precision/recall of a result set against ground truth.
    Eval {
        /// JSON map: image id -> match results.
        results: PathBuf,
        /// JSON map: image id -> [[tpc, version], ...].
        truth: PathBuf,
    },
    /// Analyze a consecutive firmware series (one device lineage).
    Series {
        /// JSON list of report paths, ordered by release date.
        manifest: PathBuf,
    },
}

#[derive(Subcommand)]
enum DbCommand {
    /// Add one TPC version from C/C++ sources and/or ACFG JSON.
    BuildTpc {
        name: String,
        version: String,
        /// Source file/directory; *.json files are read as ACFG
        /// exchange documents, C/C++ sources are lexed.
        source: PathBuf,
        #[arg(long)]
        license: Option<String>,
        /// ISO-8601 release date of this version.
        #[arg(long)]
        release_date: Option<chrono::NaiveDate>,
        /// CVE product name when it differs from the TPC name.
        #[arg(long)]
        cpe_product: Option<String>,
    },
    /// Import a CVE feed (flat JSON list).
    ImportCve { feed: PathBuf },
}

#[derive(Args)]
struct ScanArgs {
    /// Image files or directories of images.
    images: Vec<PathBuf>,
    /// Where report and manifest JSON go (default: next to each image).
    #[arg(long)]
    report_dir: Option<PathBuf>,
    /// Mirror extracted files under this directory.
    #[arg(long)]
    extract_dir: Option<PathBuf>,
    /// Exit with code 2 when any finding is present.
    #[arg(long)]
    fail_on_findings: bool,
    /// Worker threads (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    e.print().ok();
                    return ExitCode::SUCCESS;
                }
                _ => EX_USAGE,
            };
            eprintln!("{e}");
            return ExitCode::from(code);
        }
    };

    let config = match Config::resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EX_USAGE);
        }
    };

    let result = match &cli.command {
        Command::Db { action } => run_db(action, &config),
        Command::Scan(args) => run_scan(args, &config),
        Command::Tune { manifest, grid_step } => run_tune(manifest, *grid_step, &config),
        Command::Eval { results, truth } => run_eval(results, truth),
        Command::Series { manifest } => run_series(manifest, &config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EX_IOERR)
        }
    }
}

type CmdResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn load_db(config: &Config) -> TpcDatabase {
    match TpcDatabase::load(&config.db_dir) {
        Ok(db) => db,
        Err(e) => {
            log::warn!(
                "no usable database at {} ({e}); matching will find nothing",
                config.db_dir.display()
            );
            TpcDatabase::new()
        }
    }
}

fn run_db(action: &DbCommand, config: &Config) -> CmdResult {
    match action {
        DbCommand::BuildTpc {
            name,
            version,
            source,
            license,
            release_date,
            cpe_product,
        } => {
            let mut db = match TpcDatabase::load(&config.db_dir) {
                Ok(db) => db,
                Err(_) => TpcDatabase::new(),
            };
            let mut record = db.tpc(name).cloned().unwrap_or_else(|| {
                firmsca_core::tpcdb::TpcRecord::new(name.clone())
            });
            if let Some(license) = license {
                record.license = Some(license.clone());
            }
            if let Some(product) = cpe_product {
                record.cpe_product = Some(product.clone());
            }

            let mut sig = VersionSignature::new(version.clone());
            sig.release_date = *release_date;
            for file in source_files(source)? {
                let data = std::fs::read(&file)?;
                match file.extension().and_then(|e| e.to_str()) {
                    Some("json") => {
                        let text = String::from_utf8_lossy(&data);
                        let acfgs = import_acfgs(&text).map_err(std::io::Error::other)?;
                        sig.acfgs.extend(acfgs);
                    }
                    Some("c" | "h" | "cc" | "cpp" | "hpp" | "cxx") => {
                        let features = lex_source_features(&String::from_utf8_lossy(&data));
                        sig.strings.extend(features.strings);
                        sig.functions.extend(features.functions);
                    }
                    _ => log::warn!("ignored {} (not a source or ACFG file)", file.display()),
                }
            }
            record.versions.retain(|v| v.version != *version);
            record.versions.push(sig);
            db.upsert_tpc(record)?;
            db.save(&config.db_dir)?;
            println!(
                "{name} {version}: database now has {} TPC(s) at {}",
                db.tpcs.len(),
                config.db_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        DbCommand::ImportCve { feed } => {
            let mut db = match TpcDatabase::load(&config.db_dir) {
                Ok(db) => db,
                Err(_) => TpcDatabase::new(),
            };
            let text = std::fs::read_to_string(feed)?;
            let outcome = import_cve_feed(&text)?;
            for reject in &outcome.rejects {
                eprintln!("rejected {}: {}", reject.cve_id, reject.reason);
            }
            let accepted = outcome.records.len();
            db.import_cves(outcome.records);
            db.save(&config.db_dir)?;
            println!(
                "imported {accepted} CVE record(s), rejected {}; database has {}",
                outcome.rejects.len(),
                db.cves.len()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn source_files(path: &Path) -> std::io::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

fn collect_images(inputs: &[PathBuf]) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut children: Vec<PathBuf> = std::fs::read_dir(input)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.is_file())
                .filter(|p| {
                    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    !name.ends_with(".meta.json") && !name.ends_with(".acfgs.json")
                })
                .collect();
            children.sort();
            out.extend(children);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

fn image_id_for(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image")
        .to_string()
}

fn scan_one(path: &Path, config: &Config, db: &TpcDatabase) -> Result<ScanOutcome, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("read {}: {e}", path.display()))?;
    let metadata: Option<ImageMetadata> = {
        let sidecar = sidecar_path(path, "meta.json");
        match std::fs::read_to_string(&sidecar) {
            Ok(text) => Some(
                serde_json::from_str(&text)
                    .map_err(|e| format!("parse {}: {e}", sidecar.display()))?,
            ),
            Err(_) => None,
        }
    };
    let extra_acfgs = {
        let sidecar = sidecar_path(path, "acfgs.json");
        match std::fs::read_to_string(&sidecar) {
            Ok(text) => import_acfgs(&text).map_err(|e| format!("{}: {e}", sidecar.display()))?,
            Err(_) => Vec::new(),
        }
    };
    let image = FirmwareImage {
        id: image_id_for(path),
        name: path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("image")
            .to_string(),
        bytes,
        metadata,
    };
    Ok(scan_image(&image, db, &config.scan, extra_acfgs))
}

fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

fn write_outcome(
    path: &Path,
    outcome: &ScanOutcome,
    args: &ScanArgs,
) -> Result<(), Box<dyn std::error::Error>> {
    let report_dir = match &args.report_dir {
        Some(dir) => dir.clone(),
        None => path.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    std::fs::create_dir_all(&report_dir)?;
    let id = &outcome.report.image_id;
    std::fs::write(
        report_dir.join(format!("{id}.report.json")),
        serde_json::to_vec_pretty(&outcome.report)?,
    )?;
    std::fs::write(
        report_dir.join(format!("{id}.manifest.json")),
        serde_json::to_vec_pretty(&outcome.manifest)?,
    )?;
    if let Some(extract_dir) = &args.extract_dir {
        let base = extract_dir.join(id);
        for obj in &outcome.objects {
            let target = base.join(&obj.path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(target, &obj.bytes)?;
        }
    }
    Ok(())
}

fn run_scan(args: &ScanArgs, config: &Config) -> CmdResult {
    if args.images.is_empty() {
        eprintln!("error: no images given");
        return Ok(ExitCode::from(EX_USAGE));
    }
    let paths = collect_images(&args.images)?;
    if paths.is_empty() {
        eprintln!("error: no image files found");
        return Ok(ExitCode::from(EX_IOERR));
    }
    let db = load_db(config);

    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }

    // Parallel per-image pipelines; results collected in input order so
    // output stays reproducible.
    let outcomes: Vec<(PathBuf, Result<ScanOutcome, String>)> = paths
        .par_iter()
        .map(|path| (path.clone(), scan_one(path, config, &db)))
        .collect();

    let mut findings_present = false;
    let mut failures = 0usize;
    for (path, outcome) in &outcomes {
        match outcome {
            Ok(outcome) => {
                if let Err(e) = write_outcome(path, outcome, args) {
                    eprintln!("{}: failed to write outputs: {e}", path.display());
                    failures += 1;
                    continue;
                }
                findings_present |= !outcome.report.findings.is_empty();
                print!("{}", outcome.report.render_text());
                println!(
                    "TPCs: {}, Vulns: {}, time: {} ms",
                    outcome.report.matches.len(),
                    outcome.report.findings.len(),
                    outcome.report.wall_time_ms
                );
            }
            Err(e) => {
                // One bad image never aborts the batch.
                eprintln!("{}: {e}", path.display());
                failures += 1;
            }
        }
    }
    if failures == paths.len() {
        return Ok(ExitCode::from(EX_IOERR));
    }
    let fail_on_findings = args.fail_on_findings || config.fail_on_findings;
    if fail_on_findings && findings_present {
        return Ok(ExitCode::from(EX_FINDINGS));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_tune(manifest: &Path, grid_step: f64, config: &Config) -> CmdResult {
    let text = std::fs::read_to_string(manifest)?;
    let labeled: Vec<LabeledImage> = serde_json::from_str(&text)?;
    let db = load_db(config);
    let thresholds = tune_thresholds(&db, &labeled, grid_step)?;
    println!(
        "alpha={:.2} beta={:.2} gamma={:.2}",
        thresholds.alpha, thresholds.beta, thresholds.gamma
    );
    Ok(ExitCode::SUCCESS)
}

fn run_eval(results_path: &Path, truth_path: &Path) -> CmdResult {
    let results: BTreeMap<String, Vec<MatchResult>> =
        serde_json::from_str(&std::fs::read_to_string(results_path)?)?;
    let truth_pairs: BTreeMap<String, Vec<(String, String)>> =
        serde_json::from_str(&std::fs::read_to_string(truth_path)?)?;
    let truth = truth_pairs
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect();
    let report = evaluate(&results, &truth);
    println!(
        "tpc-level:     precision {:.4} recall {:.4}",
        report.tpc_level.precision, report.tpc_level.recall
    );
    println!(
        "version-level: precision {:.4} recall {:.4}",
        report.version_level.precision, report.version_level.recall
    );
    Ok(ExitCode::SUCCESS)
}

fn run_series(manifest: &Path, config: &Config) -> CmdResult {
    let text = std::fs::read_to_string(manifest)?;
    let report_paths: Vec<PathBuf> = serde_json::from_str(&text)?;
    let mut reports: Vec<ScanReport> = Vec::new();
    for path in &report_paths {
        let resolved = if path.is_relative() {
            manifest.parent().unwrap_or(Path::new(".")).join(path)
        } else {
            path.clone()
        };
        reports.push(serde_json::from_str(&std::fs::read_to_string(&resolved)?)?);
    }
    let db = load_db(config);
    let series = series_analysis(&reports, &db)?;
    println!("{}", serde_json::to_string_pretty(&series)?);
    Ok(ExitCode::SUCCESS)
}
