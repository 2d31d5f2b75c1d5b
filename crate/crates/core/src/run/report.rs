use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::csv::format_float;
use super::{RunManifest, RunStatus};
use crate::Verdict;

/// Metric names reported as fitted exponents, in column order.
const EXPONENT_METRICS: [&str; 1] = ["tail_slope"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    VerdictFailure,
    DigestMismatch,
    Unreadable,
}

impl RowStatus {
    fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::VerdictFailure => "verdict-failure",
            RowStatus::DigestMismatch => "digest-mismatch",
            RowStatus::Unreadable => "unreadable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub manifest: PathBuf,
    pub kind: String,
    pub name: String,
    pub scenario_hash: String,
    pub status: RowStatus,
    pub passed: usize,
    pub total: usize,
    /// `name=verdict` for every certificate that is not pass, vacuous or
    /// convergent-so-far.
    pub flagged: Vec<String>,
    /// `certificate:metric=value` for fitted exponents.
    pub exponents: Vec<String>,
    /// Mismatched files or the read error.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

/// Reads every manifest, re-hashes the files it lists and tabulates the
/// verdicts. Rows keep the input order.
pub fn report(paths: &[PathBuf]) -> Report {
    Report { rows: paths.iter().map(|p| row(p)).collect() }
}

fn row(path: &Path) -> ReportRow {
    let mut r = ReportRow {
        manifest: path.to_path_buf(),
        kind: String::new(),
        name: String::new(),
        scenario_hash: String::new(),
        status: RowStatus::Unreadable,
        passed: 0,
        total: 0,
        flagged: Vec::new(),
        exponents: Vec::new(),
        detail: String::new(),
    };
    let m = match RunManifest::load(path) {
        Ok(m) => m,
        Err(e) => {
            r.detail = e;
            return r;
        }
    };
    r.kind = serde_json::to_value(m.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    r.name = m.name.clone().unwrap_or_default();
    r.scenario_hash = m.scenario_hash.clone();
    r.total = m.verdicts.len();
    r.passed = m.verdicts.iter().filter(|v| v.verdict.is_ok()).count();
    r.flagged = m.verdicts.iter().filter(|v| !v.verdict.is_ok()).map(|v| format!("{}={}", v.name, v.verdict)).collect();
    for v in &m.verdicts {
        for key in EXPONENT_METRICS {
            if let Some(Some(x)) = v.metrics.get(key) {
                r.exponents.push(format!("{}:{key}={}", v.name, format_float(*x)));
            }
        }
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let bad = m.mismatched_files(dir);
    let failed = m.status == RunStatus::Fail || m.verdicts.iter().any(|v| v.verdict == Verdict::Fail);
    r.status = if !bad.is_empty() {
        r.detail = bad.join(" ");
        RowStatus::DigestMismatch
    } else if failed {
        RowStatus::VerdictFailure
    } else {
        RowStatus::Ok
    };
    r
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Report {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.status == RowStatus::Ok)
    }

    /// Columns: manifest, kind, name, scenario_hash, status, passed, total,
    /// flagged, exponents, detail. Lists inside a cell are `;`-separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("manifest,kind,name,scenario_hash,status,passed,total,flagged,exponents,detail\n");
        for r in &self.rows {
            let cells = [
                r.manifest.display().to_string(),
                r.kind.clone(),
                r.name.clone(),
                r.scenario_hash.clone(),
                r.status.as_str().to_string(),
                r.passed.to_string(),
                r.total.to_string(),
                r.flagged.join(";"),
                r.exponents.join(";"),
                r.detail.clone(),
            ];
            let line: Vec<String> = cells.iter().map(|c| csv_field(c)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let label = if r.name.is_empty() { r.kind.clone() } else { format!("{} ({})", r.name, r.kind) };
            let _ = writeln!(out, "{:<16} {}/{} certificates ok  {}  {}", r.status.as_str(), r.passed, r.total, label, r.manifest.display());
            for f in &r.flagged {
                let _ = writeln!(out, "    flagged   {f}");
            }
            for e in &r.exponents {
                let _ = writeln!(out, "    exponent  {e}");
            }
            if !r.detail.is_empty() {
                let _ = writeln!(out, "    {}", r.detail);
            }
        }
        let ok = self.rows.iter().filter(|r| r.status == RowStatus::Ok).count();
        let _ = writeln!(out, "{ok} of {} runs ok", self.rows.len());
        out
    }
}
