use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::positive;
use super::{RunError, ScenarioOutput, Table, Tolerances};
use crate::circle::{CircleGrid, Scheme};
use crate::tsym::io::read_history;
use crate::tsym::{avtd_quantities, energies_k, expansion_history, monotonicity_residual, ExpansionProfile, TsymHistory, TRIANGLE_TOL};
use crate::{Certificate, Result, Verdict};

fn two_pi() -> f64 {
    2.0 * PI
}

fn spectral() -> Scheme {
    Scheme::Spectral
}

/// Histories generated from the formal expansion on `τ = tau_start,
/// tau_start + tau_step, …, ≤ tau_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSource {
    pub profile: ExpansionProfile,
    pub n_y: usize,
    #[serde(default = "two_pi")]
    pub length: f64,
    #[serde(default = "spectral")]
    pub scheme: Scheme,
    /// The twist constant `K`.
    pub twist: f64,
    pub tau_start: f64,
    pub tau_end: f64,
    pub tau_step: f64,
}

impl ExpansionSource {
    fn grid(&self) -> Result<CircleGrid> {
        CircleGrid::new(self.n_y, self.length, self.scheme)
    }

    fn taus(&self) -> Vec<f64> {
        let count = ((self.tau_end - self.tau_start) / self.tau_step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.tau_start + self.tau_step * i as f64).collect()
    }
}

/// Exactly one of `history` (a history file relative to the config) and
/// `expansion`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsymAnalyzeParams {
    #[serde(default)]
    pub history: Option<PathBuf>,
    #[serde(default)]
    pub expansion: Option<ExpansionSource>,
}

impl TsymAnalyzeParams {
    pub(crate) fn validate(&self) -> std::result::Result<(), RunError> {
        match (&self.history, &self.expansion) {
            (Some(_), None) => Ok(()),
            (None, Some(e)) => {
                if e.n_y < 8 || e.n_y % 2 != 0 {
                    return Err(RunError::config("params.expansion.n_y", format!("must be even and at least 8, got {}", e.n_y)));
                }
                positive("params.expansion.length", e.length)?;
                positive("params.expansion.tau_step", e.tau_step)?;
                if !(e.tau_start >= 1.0) {
                    return Err(RunError::config("params.expansion.tau_start", "the expansion is evaluated for τ ≥ 1"));
                }
                if !(e.tau_end.is_finite() && e.tau_end > e.tau_start) {
                    return Err(RunError::config("params.expansion.tau_end", "must be finite and exceed tau_start"));
                }
                if e.taus().len() < 10 {
                    return Err(RunError::config("params.expansion.tau_step", "fewer than 10 times in the range"));
                }
                if !e.twist.is_finite() {
                    return Err(RunError::config("params.expansion.twist", "must be finite"));
                }
                let grid = e.grid().map_err(|err| RunError::config("params.expansion", err.to_string()))?;
                e.profile.validate(&grid).map_err(|err| RunError::config("params.expansion.profile", err.to_string()))?;
                Ok(())
            }
            _ => Err(RunError::config("params", "give exactly one of `history` and `expansion`")),
        }
    }
}

pub(crate) fn analyze(p: &TsymAnalyzeParams, base: &Path, tol: &Tolerances) -> std::result::Result<ScenarioOutput, RunError> {
    let mut notes = Vec::new();
    let history = match (&p.history, &p.expansion) {
        (Some(rel), _) => {
            let path = base.join(rel);
            let file = File::open(&path).map_err(|e| RunError::config("params.history", format!("{}: {e}", path.display())))?;
            read_history(BufReader::new(file))?
        }
        (None, Some(e)) => {
            let grid = e.grid()?;
            notes = e.profile.validate(&grid)?;
            expansion_history(&e.profile, &e.taus(), &grid, e.twist)?
        }
        (None, None) => unreachable!("validated"),
    };
    let history: TsymHistory = history.increasing_tau();
    let report = avtd_quantities(&history)?;

    let energies: Vec<_> = history.states().iter().map(energies_k).collect::<Result<_>>()?;
    let m = history.len();
    // AVTD samples sit at the interior times 1..m−1
    let interior = |f: &dyn Fn(usize) -> f64| -> Vec<Option<f64>> {
        (0..m).map(|i| (i >= 1 && i + 1 < m).then(|| f(i - 1))).collect()
    };
    let s = &report.samples;
    let weight = |i: usize| (2.0 * s[i].tau).exp();
    let table = Table::new()
        .column("tau", history.taus())
        .column("R", history.r_values())
        .column("Ehat_K", energies.iter().map(|e| e.ehat_k).collect())
        .column("Etilde_K", energies.iter().map(|e| e.etilde_k).collect())
        .column("D_integral", energies.iter().map(|e| e.d_integral).collect())
        .column("holonomy", energies.iter().map(|e| e.holonomy).collect())
        .sparse_column("q_avtd_norm", interior(&|i| s[i].q_avtd_norm))
        .sparse_column("q_full_norm", interior(&|i| s[i].q_full_norm))
        .sparse_column("forcing_norm", interior(&|i| s[i].forcing_norm))
        .sparse_column("avtd_integrand", interior(&|i| weight(i) * s[i].q_avtd_norm.powi(2)))
        .sparse_column("full_integrand", interior(&|i| weight(i) * s[i].q_full_norm.powi(2)))
        .sparse_column("forcing_integrand", interior(&|i| weight(i) * s[i].forcing_norm.powi(2)));

    let mut implication = report.implication.clone();
    for n in notes {
        implication = implication.with_note(n);
    }
    let triangle = Certificate::new("tsym-triangle", Verdict::from_bool(report.triangle_excess <= TRIANGLE_TOL))
        .with_tolerance(TRIANGLE_TOL)
        .with_metric("excess", report.triangle_excess)
        .with_metric("holonomy_bounded_below", if report.holonomy_bounded_below { 1.0 } else { 0.0 });
    let mut certs = vec![report.forcing, report.full, report.avtd, implication, triangle];
    // the truncated expansion is not a solution, so the energy identity is
    // only checked on supplied histories
    if p.history.is_some() {
        certs.push(monotonicity_residual(&history, tol.residual.unwrap_or(1e-6))?);
    }
    let mut out = ScenarioOutput { files: Vec::new(), certificates: certs };
    out.csv("tsym_series.csv", &table);
    Ok(out)
}
