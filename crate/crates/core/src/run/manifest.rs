use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Kind, RunError};
use crate::{Certificate, Verdict};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictEntry {
    pub name: String,
    pub verdict: Verdict,
    pub metrics: BTreeMap<String, Option<f64>>,
}

impl From<&Certificate> for VerdictEntry {
    fn from(c: &Certificate) -> Self {
        // NaN and infinities have no JSON form; they are recorded as null
        let metrics = c.metrics.iter().map(|(k, v)| (k.clone(), v.is_finite().then_some(*v))).collect();
        Self { name: c.name.clone(), verdict: c.verdict, metrics }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    /// No certificate failed.
    Ok,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub kind: Kind,
    pub name: Option<String>,
    pub seed: u64,
    pub scenario_hash: String,
    pub echo: Value,
    pub files: Vec<FileEntry>,
    pub wall_clock_seconds: f64,
    pub verdicts: Vec<VerdictEntry>,
    pub status: RunStatus,
}

impl RunManifest {
    pub(crate) fn write_atomic(&self, dir: &Path) -> Result<(), RunError> {
        let tmp = dir.join(format!("{MANIFEST_NAME}.tmp"));
        let bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        fs::write(&tmp, bytes).map_err(RunError::io(format!("writing {}", tmp.display())))?;
        fs::rename(&tmp, dir.join(MANIFEST_NAME)).map_err(RunError::io(format!("renaming {}", tmp.display())))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("parsing {}: {e}", path.display()))
    }

    /// Files whose current digest differs from the recorded one, or that are
    /// missing, relative to `dir`.
    pub fn mismatched_files(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| match fs::read(dir.join(&f.path)) {
                Ok(bytes) => super::sha256_hex(&bytes) != f.sha256,
                Err(_) => true,
            })
            .map(|f| f.path.clone())
            .collect()
    }
}
