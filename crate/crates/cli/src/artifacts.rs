//! On-disk artifacts and the helpers that read and write them.

use std::fs;
use std::path::{Path, PathBuf};

use qggm_core::diagonal::DiagonalEstimate;
use qggm_core::metrics::{EvalReport, RhatEntry, RocPoint};
use qggm_core::simgen::{GroundTruth, PatternSpec};
use qggm_core::{DenseMatrix, Error, PosteriorSummary, PriorConditionSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const TRUTH_FILE: &str = "truth.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUN_FILE: &str = "run.json";
pub const FIT_FILE: &str = "fit.json";
pub const SAMPLES_FILE: &str = "samples.bin";
pub const TRACE_FILE: &str = "trace.csv";
pub const TIMING_FILE: &str = "timing.json";

/// Header shared by every JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    #[serde(flatten)]
    pub provenance: Provenance,
    /// Absent for truths supplied from outside the generator.
    #[serde(default)]
    pub spec: Option<PatternSpec>,
    pub support_size: usize,
    pub d_star: usize,
    pub truth: GroundTruth,
}

impl TruthFile {
    pub fn pattern(&self) -> String {
        self.spec.as_ref().map_or_else(|| "custom".to_string(), |s| s.kind.name().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEntry {
    pub file: String,
    pub seed: u64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub spec: PatternSpec,
    pub min_eig: f64,
    pub attempts: usize,
    pub support_size: usize,
    pub truth_file: String,
    pub replicates: Vec<ReplicateEntry>,
}

/// Describes the CSV files of a directory, which cannot carry metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub files: Vec<String>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizeRecord {
    pub requested: String,
    pub mode: String,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub input: PathBuf,
    pub n: usize,
    pub p: usize,
    /// `quasiGHS` with an estimated diagonal, `quasiGHS-diag` with a known one.
    pub method: String,
    pub diag_source: String,
    pub diag_estimates: Option<DiagonalEstimate>,
    /// What the Frobenius trace is measured against: `truth` or `diagonal`.
    pub reference: String,
    pub symmetrize: SymmetrizeRecord,
    /// Symmetrized posterior mean.
    pub estimate: DenseMatrix,
    /// Posterior summary with the draws moved to `samples_file`.
    pub summary: PosteriorSummary,
    pub rhat: Vec<RhatEntry>,
    pub rhat_variant: String,
    pub samples_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub diagonal_seconds: f64,
    pub gibbs_seconds: f64,
    pub symmetrize_seconds: f64,
    pub total_seconds: f64,
    pub minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub source: PathBuf,
    pub truth: PathBuf,
    pub pattern: String,
    pub method: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub source: PathBuf,
    pub truth: PathBuf,
    pub pattern: String,
    pub method: String,
    pub frob_error: f64,
    pub spectral_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhatFile {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub variant: String,
    pub threshold: f64,
    pub entries: Vec<RhatEntry>,
    /// All entries below the threshold; `None` for single-chain fits.
    pub converged: Option<bool>,
    pub window: usize,
    /// sd / mean of each chain's trailing Frobenius-trace window.
    pub relative_sd: Vec<f64>,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorCheckRecord {
    pub alpha: f64,
    pub a_n: f64,
    #[serde(rename = "E_n")]
    pub e_n: f64,
    pub p: usize,
    pub u: f64,
    pub c: f64,
    pub mass_outside: f64,
    pub inf_density: f64,
    pub passes_7a: bool,
    pub passes_7b: bool,
}

impl PriorCheckRecord {
    pub fn spec(&self) -> PriorConditionSpec {
        PriorConditionSpec { a_n: self.a_n, e_n: self.e_n, p: self.p, u: self.u, c: self.c, alpha: self.alpha }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub p: usize,
    pub n: usize,
    pub iterations: usize,
    pub retained: usize,
    pub simulate_seconds: f64,
    pub timing: Timing,
}

pub fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

/// Read a JSON artifact; a missing file is reported with its expected path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

/// True when `path` exists and holds at least one entry.
pub fn dir_non_empty(path: &Path) -> Result<bool, Error> {
    match fs::read_dir(path) {
        Ok(mut it) => Ok(it.next().is_some()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
        Err(e) if e.kind() == std::io::ErrorKind::NotADirectory => Err(Error::InvalidInput(format!(
            "output path {} exists and is not a directory",
            path.display()
        ))),
        Err(e) => Err(io_error(path, e)),
    }
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut s = String::from("fpr,tpr\n");
    for pt in points {
        s.push_str(&format!("{},{}\n", pt.fpr, pt.tpr));
    }
    s
}

/// Parse a `fpr,tpr` CSV written by [`roc_csv`].
pub fn parse_roc_csv(text: &str, source: &str) -> Result<Vec<(f64, f64)>, Error> {
    let mut lines = text.lines();
    if lines.next() != Some("fpr,tpr") {
        return Err(Error::Parse { path: source.into(), line: 1, column: 1, message: "expected header 'fpr,tpr'".into() });
    }
    lines
        .enumerate()
        .map(|(k, l)| {
            let bad = |m: &str| Error::Parse { path: source.into(), line: k + 2, column: 1, message: m.into() };
            let (a, b) = l.split_once(',').ok_or_else(|| bad("expected two fields"))?;
            Ok((a.parse().map_err(|_| bad("bad fpr"))?, b.parse().map_err(|_| bad("bad tpr"))?))
        })
        .collect()
}
