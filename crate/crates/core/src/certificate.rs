//! Verdict records shared by all checks.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    ConvergentSoFar,
    Growing,
    /// The hypothesis of the check is not met, so it carries no information.
    Vacuous,
}

impl Verdict {
    /// Whether the verdict counts as success when aggregated.
    pub fn is_ok(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::ConvergentSoFar | Verdict::Vacuous)
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::ConvergentSoFar => "convergent-so-far",
            Verdict::Growing => "growing",
            Verdict::Vacuous => "vacuous",
        };
        f.write_str(s)
    }
}

/// Outcome of a numerical check: verdict, named scalar metrics and the
/// sampled series the verdict was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub verdict: Verdict,
    pub metrics: BTreeMap<String, f64>,
    /// Named series, e.g. `"s"` and `"integrand"`.
    pub samples: BTreeMap<String, Vec<f64>>,
    pub tolerance: Option<f64>,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn new(name: impl Into<String>, verdict: Verdict) -> Self {
        Self {
            name: name.into(),
            verdict,
            metrics: BTreeMap::new(),
            samples: BTreeMap::new(),
            tolerance: None,
            notes: Vec::new(),
        }
    }

    pub fn with_metric(mut self, key: impl Into<String>, value: f64) -> Self {
        self.metrics.insert(key.into(), value);
        self
    }

    pub fn with_samples(mut self, key: impl Into<String>, values: Vec<f64>) -> Self {
        self.samples.insert(key.into(), values);
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Metric lookup; `NaN` when absent.
    pub fn metric(&self, key: &str) -> f64 {
        self.metrics.get(key).copied().unwrap_or(f64::NAN)
    }

    pub fn passed(&self) -> bool {
        self.verdict.is_ok()
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.verdict)?;
        for (k, v) in &self.metrics {
            write!(f, " {k}={v:.3e}")?;
        }
        Ok(())
    }
}
