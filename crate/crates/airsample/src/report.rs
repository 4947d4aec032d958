//! Report emission: sweep tables (CSV per target, JSON with the config
//! echo embedded), calibration and selection reports, and the run
//! manifest with content hashes.
//!
//! Numbers are serialized in shortest round-trip form, so emitting and
//! re-parsing a report yields value-identical data, and identical runs
//! yield byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::csvio::format_number;
use crate::experiment::{CalibrationOutcome, SweepReport, SweepRow};

/// The pinned sweep CSV column order.
pub const SWEEP_CSV_HEADER: &str =
    "t_sen_s,n_s,t_r_s,mode,dc,cv_r2_mean,cv_r2_lo,cv_r2_hi,test_r2,test_rmse,retention,avg_power_mw";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("report is empty")]
    Empty,
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

fn sweep_csv_text(rows: &[&SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.t_sen_s,
            row.n_s,
            row.t_r_s,
            row.mode,
            format_number(row.dc),
            opt(row.cv_r2_mean),
            opt(row.cv_r2_lo),
            opt(row.cv_r2_hi),
            opt(row.test_r2),
            opt(row.test_rmse),
            opt(row.retention),
            format_number(row.avg_power_mw),
        );
    }
    out
}

/// Write one CSV per target (`sweep_o3.csv`, ...) plus the config echo
/// sidecar. Failed rows keep their plan columns and leave the metric
/// columns empty; the JSON report carries their failure reasons.
pub fn write_sweep_csv(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if report.rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut by_target: BTreeMap<&str, Vec<&SweepRow>> = BTreeMap::new();
    for row in &report.rows {
        by_target.entry(row.target.as_str()).or_default().push(row);
    }
    let mut written = Vec::new();
    for (target, rows) in by_target {
        let path = dir.join(format!("sweep_{}.csv", target.to_ascii_lowercase()));
        write_file(&path, &sweep_csv_text(&rows))?;
        written.push(path);
    }
    let echo_path = dir.join("config_echo.toml");
    write_file(&echo_path, &report.config_echo)?;
    written.push(echo_path);
    Ok(written)
}

/// Write the full sweep report (all rows, per-seed outcomes, failure
/// reasons, config echo) as pretty JSON.
pub fn write_sweep_json(report: &SweepReport, path: &Path) -> Result<(), ReportError> {
    if report.rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut text = serde_json::to_string_pretty(report).map_err(|source| ReportError::Json {
        path: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    write_file(path, &text)
}

pub fn read_sweep_json(path: &Path) -> Result<SweepReport, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Serializable form of a single-plan calibration outcome.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CalibrationReport {
    pub target: String,
    pub t_sen_s: i64,
    pub n_s: u32,
    pub t_r_s: i64,
    pub mode: String,
    pub dc: f64,
    pub retention: f64,
    pub usable_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub feature_names: Vec<String>,
    /// Intercept first.
    pub beta: Vec<f64>,
    pub cv_k: usize,
    pub cv_per_fold_r2: Vec<f64>,
    pub cv_mean_r2: f64,
    pub cv_ci95: (f64, f64),
    pub test_r2: f64,
    pub test_rmse: f64,
}

impl CalibrationReport {
    pub fn from_outcome(outcome: &CalibrationOutcome) -> CalibrationReport {
        CalibrationReport {
            target: outcome.target.as_str().to_string(),
            t_sen_s: outcome.plan.t_sen_s,
            n_s: outcome.plan.n_s,
            t_r_s: outcome.plan.t_r_s,
            mode: outcome.plan.mode.as_str().to_string(),
            dc: outcome.dc,
            retention: outcome.retention,
            usable_rows: outcome.usable_rows,
            train_rows: outcome.eval.train_rows,
            test_rows: outcome.eval.test_rows,
            feature_names: outcome.eval.model.feature_names.clone(),
            beta: outcome.eval.model.beta.clone(),
            cv_k: outcome.eval.cv.k,
            cv_per_fold_r2: outcome.eval.cv.per_fold_r2.clone(),
            cv_mean_r2: outcome.eval.cv.mean_r2,
            cv_ci95: outcome.eval.cv.ci95,
            test_r2: outcome.eval.test_r2,
            test_rmse: outcome.eval.test_rmse,
        }
    }
}

/// Calibration bundle with the config echo, one entry per target.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CalibrationBundle {
    pub config_echo: String,
    pub seed: u64,
    pub models: Vec<CalibrationReport>,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| ReportError::Json {
        path: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    write_file(path, &text)
}

/// One step of the forward-selection trajectory, file form.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SelectionReport {
    pub config_echo: String,
    pub target: String,
    pub always_in: Vec<String>,
    pub steps: Vec<SelectionStepReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SelectionStepReport {
    pub feature: String,
    pub cv_mean_r2: f64,
    pub cv_ci95: (f64, f64),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// The run manifest: configuration hash, seeds, and a hash per output
/// file. Two runs are identical iff their manifests are.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub outputs: BTreeMap<String, String>,
}

/// Hash the given output files and write `manifest.json` next to them.
pub fn write_manifest(
    dir: &Path,
    config_echo: &str,
    seeds: &[u64],
    outputs: &[PathBuf],
) -> Result<Manifest, ReportError> {
    let mut hashed = BTreeMap::new();
    for path in outputs {
        let bytes = fs::read(path).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        hashed.insert(name, sha256_hex(&bytes));
    }
    let manifest = Manifest {
        config_sha256: sha256_hex(config_echo.as_bytes()),
        seeds: seeds.to_vec(),
        outputs: hashed,
    };
    write_json(&manifest, &dir.join("manifest.json"))?;
    Ok(manifest)
}
