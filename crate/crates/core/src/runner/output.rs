//! Run directories: config, record, series CSVs, snapshots and a manifest.
//!
//! The manifest lists every file with its SHA-256 and contains no wall-clock
//! data, so identical runs produce identical manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::experiment::{ExperimentFailure, ExperimentOutcome, FinalState};
use crate::error::{LabError, Result};
use crate::grid::io::{density_bytes, field_bytes};
use crate::transport::{mass_error, RunRecord};

/// Environment variable naming the directory relative outputs live under.
pub const OUTPUT_ROOT_ENV: &str = "VLASOV_LAB_OUTPUT_ROOT";

/// Manifest file name inside a run directory.
pub const MANIFEST_FILE: &str = "manifest.json";

/// One output file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Index of a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    pub abort_reason: Option<String>,
    pub config_hash: String,
    pub observations: usize,
    pub final_time: f64,
    /// `None` when the record has no `l1` series.
    pub mass_error: Option<f64>,
    /// Series name → CSV path.
    pub series: BTreeMap<String, String>,
    pub files: Vec<FileEntry>,
}

/// Process exit code for an outcome: 0 success, 2 failed check, 3 invalid
/// configuration, 4 resource budget, 1 anything else.
pub fn exit_code(error: Option<&LabError>) -> i32 {
    match error {
        None => 0,
        Some(LabError::Config { .. } | LabError::InvalidArgument(_) | LabError::InvalidDimension { .. }) => 3,
        Some(LabError::MemoryBudget { .. } | LabError::StencilBudget(_)) => 4,
        Some(_) => 1,
    }
}

/// Exit code for a failed acceptance or lemma check.
pub const CHECK_FAILURE_EXIT: i32 = 2;

/// Resolves `output` against `VLASOV_LAB_OUTPUT_ROOT` (default: the working directory).
pub fn resolve_output_dir(output: &str) -> PathBuf {
    let p = PathBuf::from(output);
    if p.is_absolute() {
        return p;
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(p),
        _ => p,
    }
}

/// File-name form of a series name.
pub fn series_file_name(name: &str) -> String {
    let stem: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect();
    format!("{}.csv", stem.trim_end_matches('_'))
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `t,value` CSV; absent values are written as `NaN`.
pub fn series_csv(record: &RunRecord, name: &str) -> Result<String> {
    let values = record.series(name)?;
    let mut out = String::from("t,value\n");
    for (t, v) in record.times.iter().zip(values) {
        let _ = writeln!(out, "{t:?},{v:?}");
    }
    Ok(out)
}

/// Parses a `t,value` CSV.
pub fn parse_series_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "t,value" => {}
        _ => return Err(LabError::Format("series CSV must start with 't,value'".into())),
    }
    let mut out = Vec::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || LabError::Format(format!("line {}: expected 't,value', got '{line}'", k + 1));
        let (t, v) = line.split_once(',').ok_or_else(bad)?;
        out.push((t.trim().parse().map_err(|_| bad())?, v.trim().parse().map_err(|_| bad())?));
    }
    Ok(out)
}

struct Writer {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Writer {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.push(FileEntry { path: rel.to_string(), bytes: bytes.len() as u64, sha256: sha_hex(bytes) });
        Ok(())
    }
}

fn write_run(dir: &Path, config: &ExperimentConfig, record: &RunRecord, state: Option<&FinalState>, error: Option<&LabError>) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut w = Writer { dir: dir.to_path_buf(), files: Vec::new() };
    w.put("config.txt", config.serialize().as_bytes())?;
    w.put("record.json", serde_json::to_string_pretty(record)?.as_bytes())?;
    let mut series = BTreeMap::new();
    for name in record.series.keys() {
        let rel = format!("series/{}", series_file_name(name));
        if series.values().any(|p| p == &rel) {
            return Err(LabError::Format(format!("series name '{name}' collides with another after sanitizing")));
        }
        w.put(&rel, series_csv(record, name)?.as_bytes())?;
        series.insert(name.clone(), rel);
    }
    for (k, snap) in record.fields.iter().enumerate() {
        w.put(&format!("snapshots/phi_{k:03}.bin"), &field_bytes(&snap.phi, snap.time))?;
        w.put(&format!("snapshots/grad_phi_{k:03}.bin"), &field_bytes(&snap.grad_phi, snap.time))?;
    }
    if let Some(FinalState::Grid { density, coefficients }) = state {
        w.put("snapshots/density_final.bin", &density_bytes(density))?;
        if let Some(c) = coefficients {
            for (i, k, d) in c.components() {
                w.put(&format!("snapshots/varphi_{}_{}.bin", c.gamma[i].label(), k + 1), &density_bytes(d))?;
            }
        }
    }
    let manifest = Manifest {
        status: if error.is_none() { "ok" } else { "failed" }.to_string(),
        abort_reason: error.map(ToString::to_string).or_else(|| record.abort_reason.clone()),
        config_hash: record.config_hash.clone(),
        observations: record.times.len(),
        final_time: record.final_time(),
        mass_error: mass_error(record).ok(),
        series,
        files: w.files,
    };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Writes a completed run into `dir`.
pub fn write_outcome(dir: &Path, outcome: &ExperimentOutcome) -> Result<Manifest> {
    write_run(dir, &outcome.config, &outcome.record, Some(&outcome.state), None)
}

/// Writes the partial record of a failed run into `dir`.
pub fn write_failure(dir: &Path, failure: &ExperimentFailure) -> Result<Manifest> {
    write_run(dir, &failure.config, &failure.record, None, Some(&failure.error))
}

/// Re-hashes every file listed in `dir/manifest.json`; returns the paths
/// that are missing or differ.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(dir.join(MANIFEST_FILE))?)?;
    let mut bad = Vec::new();
    for entry in &manifest.files {
        match std::fs::read(dir.join(&entry.path)) {
            Ok(bytes) if bytes.len() as u64 == entry.bytes && sha_hex(&bytes) == entry.sha256 => {}
            _ => bad.push(entry.path.clone()),
        }
    }
    Ok(bad)
}
