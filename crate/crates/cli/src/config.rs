//! Configuration resolution: CLI flag > config file > built-in default.

use std::path::PathBuf;

use serde::Deserialize;

use firmsca_core::pipeline::ScanConfig;
use firmsca_core::report::Distribution;

/// JSON config file shape; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    min_string_len: Option<usize>,
    embed_iterations: Option<usize>,
    recursion_depth: Option<usize>,
    entropy_ceiling: Option<f64>,
    min_valid_instr_ratio: Option<f64>,
    db_dir: Option<PathBuf>,
    fail_on_findings: Option<bool>,
    /// "closed" (default) or "source_available".
    distribution: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub scan: ScanConfig,
    pub db_dir: PathBuf,
    pub fail_on_findings: bool,
}

impl Config {
    pub fn resolve(cli: &super::Cli) -> Result<Config, String> {
        let file: FileConfig = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("config {}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?
            }
            None => FileConfig::default(),
        };

        let mut scan = ScanConfig::default();
        if let Some(v) = file.alpha {
            scan.thresholds.alpha = v;
        }
        if let Some(v) = file.beta {
            scan.thresholds.beta = v;
        }
        if let Some(v) = file.gamma {
            scan.thresholds.gamma = v;
        }
        if let Some(v) = file.min_string_len {
            scan.min_string_len = v;
        }
        if let Some(v) = file.embed_iterations {
            scan.embed_iterations = v;
        }
        if let Some(v) = file.recursion_depth {
            scan.recursion_depth = v;
        }
        if let Some(v) = file.entropy_ceiling {
            scan.identify.entropy_ceiling = v;
        }
        if let Some(v) = file.min_valid_instr_ratio {
            scan.identify.min_valid_instr_ratio = v;
        }
        match file.distribution.as_deref() {
            Some("source_available") => scan.distribution = Distribution::SourceAvailable,
            Some("closed") | None => scan.distribution = Distribution::Closed,
            Some(other) => return Err(format!("unknown distribution {other:?}")),
        }

        // Flags override the file.
        if let Some(v) = cli.alpha {
            scan.thresholds.alpha = v;
        }
        if let Some(v) = cli.beta {
            scan.thresholds.beta = v;
        }
        if let Some(v) = cli.gamma {
            scan.thresholds.gamma = v;
        }
        scan.thresholds.validate()?;
        if scan.min_string_len == 0 {
            return Err("min_string_len must be at least 1".into());
        }

        let db_dir = cli
            .db
            .clone()
            .or_else(|| std::env::var_os("FIRMSCA_DB").map(PathBuf::from))
            .or(file.db_dir)
            .unwrap_or_else(|| PathBuf::from("tpcdb"));

        Ok(Config {
            scan,
            db_dir,
            fail_on_findings: file.fail_on_findings.unwrap_or(false),
        })
    }
}
