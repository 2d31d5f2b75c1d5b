//! Batch scenarios: JSON configs, deterministic CSV and certificate output,
//! and digest manifests that a report can verify later.
//!
//! A config names one scenario `kind`, its `params` and optional tolerance
//! overrides:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "kind": "cmc-family",
//!   "seed": 0,
//!   "params": { "family": { "kind": "kasner", "exponents": [0.6666666666666666, 0.6666666666666666, -0.3333333333333333] } }
//! }
//! ```
//!
//! Unknown keys are rejected at every level. All parameters are validated
//! before any computation, and nothing is written until the computation has
//! finished. The manifest is written last, by atomic rename.

mod cmc;
mod config;
mod csv;
mod gowdy;
mod manifest;
mod report;
mod tsym;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::{Certificate, Verdict};

pub use self::cmc::{CausalParams, CmcEvolveParams, CmcFamilyParams};
pub use self::config::{Kind, Params, Scenario, Tolerances, SCHEMA_VERSION};
pub use self::csv::{format_float, Table};
pub use self::gowdy::{GowdyAnalyzeParams, GowdyEvolveParams, InitialData};
pub use self::manifest::{FileEntry, RunManifest, RunStatus, VerdictEntry, MANIFEST_NAME};
pub use self::report::{report, Report, ReportRow, RowStatus};
pub use self::tsym::{ExpansionSource, TsymAnalyzeParams};

/// File holding every certificate of a run.
pub const CERTIFICATES_NAME: &str = "certificates.json";

#[derive(Debug, Error)]
pub enum RunError {
    /// Schema violation or invalid parameter; `path` locates it in the config.
    #[error("config error at {path}: {reason}")]
    Config { path: String, reason: String },
    #[error("computation aborted: {0}")]
    Compute(#[from] crate::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl RunError {
    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        RunError::Config { path: path.into(), reason: reason.into() }
    }

    fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| RunError::Io { context, source }
    }
}

/// Everything a scenario produces, held in memory until it is written.
#[derive(Debug, Default)]
pub struct ScenarioOutput {
    /// Data files as `(name, bytes)`; names are plain file names.
    pub files: Vec<(String, Vec<u8>)>,
    pub certificates: Vec<Certificate>,
}

impl ScenarioOutput {
    fn csv(&mut self, name: &str, table: &Table) {
        self.files.push((name.to_string(), table.to_bytes()));
    }
}

/// Runs the scenario without touching the file system (apart from reading
/// its declared inputs).
pub fn execute(scenario: &Scenario) -> Result<ScenarioOutput, RunError> {
    scenario.validate()?;
    let tol = &scenario.tolerances;
    match &scenario.params {
        Params::GowdyEvolve(p) => gowdy::evolve(p, scenario.seed, tol),
        Params::GowdyAnalyze(p) => gowdy::analyze(p, &scenario.base_dir, tol),
        Params::TsymAnalyze(p) => tsym::analyze(p, &scenario.base_dir, tol),
        Params::CmcEvolve(p) => cmc::evolve(p, tol),
        Params::CmcFamily(p) => cmc::family(p, tol),
        Params::CmcCausal(p) => cmc::causal(p),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Executes `scenario` and writes its files into `out_dir`, then the
/// manifest. A stale manifest in `out_dir` is removed before anything else
/// is written, so an interrupted run never leaves a manifest behind.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    let output = execute(scenario)?;
    let mut certificates = output.certificates;
    certificates.sort_by(|a, b| a.name.cmp(&b.name));
    let mut files = output.files;
    let bundle = serde_json::to_vec_pretty(&certificates).expect("certificates serialize");
    files.push((CERTIFICATES_NAME.to_string(), bundle));

    fs::create_dir_all(out_dir).map_err(RunError::io(format!("creating {}", out_dir.display())))?;
    let manifest_path = out_dir.join(MANIFEST_NAME);
    match fs::remove_file(&manifest_path) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(RunError::io(format!("removing {}", manifest_path.display()))(e)),
    }
    let mut entries = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(RunError::io(format!("writing {}", path.display())))?;
        entries.push(FileEntry { path: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }
    let verdicts: Vec<VerdictEntry> = certificates.iter().map(VerdictEntry::from).collect();
    let status = if certificates.iter().any(|c| c.verdict == Verdict::Fail) { RunStatus::Fail } else { RunStatus::Ok };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: scenario.kind(),
        name: scenario.name.clone(),
        seed: scenario.seed,
        scenario_hash: scenario.hash(),
        echo: scenario.echo(),
        files: entries,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        verdicts,
        status,
    };
    manifest.write_atomic(out_dir)?;
    Ok(manifest)
}

/// Output directory: the command-line override, else the config's
/// `output_dir` relative to the config file, else `<config stem>.out` next
/// to it.
pub fn resolve_out_dir(scenario: &Scenario, config_path: &Path, over: Option<&Path>) -> PathBuf {
    if let Some(o) = over {
        return o.to_path_buf();
    }
    if let Some(d) = &scenario.output_dir {
        return scenario.base_dir.join(d);
    }
    let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    scenario.base_dir.join(format!("{stem}.out"))
}
