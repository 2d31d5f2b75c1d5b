use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::{finite, positive};
use super::{RunError, ScenarioOutput, Table, Tolerances};
use crate::circle::{CircleGrid, Scheme};
use crate::gowdy::io::{read_snapshot, write_snapshot};
use crate::gowdy::{
    cfl_limit, decay_certificate, energies, energy_identities, evolve_with, homogeneous_state, random_state, twist_density_check,
    EvolveOptions, GowdyState, PolarizedBessel, RandomData, Trajectory,
};
use crate::symmat::field_derivative;
use crate::{Certificate, Result, Verdict};

fn two_pi() -> f64 {
    2.0 * PI
}

fn spectral() -> Scheme {
    Scheme::Spectral
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

fn default_amplitude() -> f64 {
    RandomData::default().amplitude
}

fn default_band() -> u32 {
    RandomData::default().band
}

/// Initial data of a Gowdy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// Band-limited random data keyed by the scenario seed.
    Random {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_amplitude")]
        velocity_amplitude: f64,
        #[serde(default = "default_band")]
        band: u32,
        #[serde(default)]
        polarized: bool,
    },
    /// Polarized `N = 2` Bessel solution, compared against the exact solution.
    Bessel { mode: u32, amplitude: f64 },
    /// Spatially constant `G = diag(T^{2q})` with `Σq = 1`, compared against
    /// the Kasner geodesic.
    Homogeneous { q: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GowdyEvolveParams {
    #[serde(rename = "N")]
    pub dim: usize,
    pub n_y: usize,
    #[serde(default = "two_pi")]
    pub length: f64,
    #[serde(default = "spectral")]
    pub scheme: Scheme,
    #[serde(default)]
    pub s0: f64,
    pub s_end: f64,
    #[serde(default = "half")]
    pub cfl: f64,
    #[serde(default)]
    pub ds_max: Option<f64>,
    /// Number of equally spaced outputs after `s0`; by default about one per
    /// `Δy`.
    #[serde(default)]
    pub outputs: Option<usize>,
    #[serde(default = "yes")]
    pub filter: bool,
    pub initial: InitialData,
    /// Compute the `H⁻¹` decay certificate (needs `|s_end − s0| ≥ 3`).
    #[serde(default = "yes")]
    pub decay: bool,
    /// Also write the final state as `final.gowdy`.
    #[serde(default)]
    pub snapshot: bool,
}

impl GowdyEvolveParams {
    pub(crate) fn validate(&self) -> std::result::Result<(), RunError> {
        if self.dim < 1 {
            return Err(RunError::config("params.N", "must be at least 1"));
        }
        if self.n_y < 8 || !self.n_y.is_multiple_of(2) {
            return Err(RunError::config("params.n_y", format!("must be even and at least 8, got {}", self.n_y)));
        }
        positive("params.length", self.length)?;
        finite("params.s0", self.s0)?;
        finite("params.s_end", self.s_end)?;
        if self.s_end == self.s0 {
            return Err(RunError::config("params.s_end", "must differ from s0"));
        }
        positive("params.cfl", self.cfl)?;
        if self.cfl > cfl_limit(self.scheme) {
            return Err(RunError::config("params.cfl", format!("{} exceeds the stability limit {}", self.cfl, cfl_limit(self.scheme))));
        }
        if let Some(d) = self.ds_max {
            positive("params.ds_max", d)?;
        }
        if self.outputs == Some(0) {
            return Err(RunError::config("params.outputs", "must be at least 1"));
        }
        if self.decay && (self.s_end - self.s0).abs() < 3.0 {
            return Err(RunError::config("params.decay", "the decay certificate needs |s_end − s0| ≥ 3; set decay to false"));
        }
        match &self.initial {
            InitialData::Random { amplitude, velocity_amplitude, .. } => {
                finite("params.initial.amplitude", *amplitude)?;
                finite("params.initial.velocity_amplitude", *velocity_amplitude)?;
            }
            InitialData::Bessel { amplitude, .. } => {
                if self.dim != 2 {
                    return Err(RunError::config("params.N", "the Bessel solution needs N = 2"));
                }
                finite("params.initial.amplitude", *amplitude)?;
            }
            InitialData::Homogeneous { q } => {
                if q.len() != self.dim {
                    return Err(RunError::config("params.initial.q", format!("needs N = {} entries, got {}", self.dim, q.len())));
                }
                let sum: f64 = q.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(RunError::config("params.initial.q", format!("entries must sum to 1, got {sum}")));
                }
            }
        }
        Ok(())
    }

    fn grid(&self) -> Result<CircleGrid> {
        CircleGrid::new(self.n_y, self.length, self.scheme)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GowdyAnalyzeParams {
    /// `.gowdy` snapshot files, relative to the config file.
    pub snapshots: Vec<PathBuf>,
    #[serde(default = "yes")]
    pub decay: bool,
}

impl GowdyAnalyzeParams {
    pub(crate) fn validate(&self) -> std::result::Result<(), RunError> {
        if self.snapshots.is_empty() {
            return Err(RunError::config("params.snapshots", "needs at least one file"));
        }
        Ok(())
    }
}

/// Largest `|∂_y B|` over the grid with `B = G⁻¹G_y`; large values flag
/// under-resolved steep features.
fn b_lipschitz(state: &GowdyState) -> Result<f64> {
    let b = state.connection()?;
    let by = field_derivative(state.grid(), &b)?;
    Ok(by.iter().map(|m| m.norm()).fold(0.0, f64::max))
}

struct Series {
    table: Table,
    constraints: Certificate,
}

/// Per-state energies, constraints and the `B` Lipschitz constant, plus the
/// sparse `W` column from a decay certificate.
fn series(traj: &Trajectory, decay: Option<&Certificate>, constraint_tol: f64) -> Result<Series> {
    let n = traj.len();
    let mut cols: [Vec<f64>; 10] = Default::default();
    let mut worst = [0.0f64; 5];
    for st in &traj.states {
        let e = energies(st)?;
        let c = st.constraints()?;
        let lip = b_lipschitz(st)?;
        for (col, v) in cols.iter_mut().zip([st.s(), st.t(), e.e, e.ehat, e.etilde, c.det, c.trace, c.connection_trace, c.self_adjoint, lip]) {
            col.push(v);
        }
        for (w, v) in worst.iter_mut().zip([c.det, c.trace, c.connection_trace, c.self_adjoint, lip]) {
            *w = w.max(v);
        }
    }
    let mut w = vec![None; n];
    if let Some(cert) = decay {
        let s = &cert.samples["s"];
        let values = &cert.samples["W"];
        let mut j = 0;
        for (i, si) in cols[0].iter().enumerate() {
            if j < s.len() && s[j] == *si {
                w[i] = Some(values[j]);
                j += 1;
            }
        }
    }
    let [s, t, e, ehat, etilde, det, trace, ctrace, sa, lips] = cols;
    let table = Table::new()
        .column("s", s)
        .column("T", t)
        .column("E", e)
        .column("Ehat", ehat)
        .column("Etilde", etilde)
        .sparse_column("W", w)
        .column("bound_integral", traj.bound_integral.clone())
        .column("det_residual", det)
        .column("trace_residual", trace)
        .column("connection_trace_residual", ctrace)
        .column("self_adjoint_residual", sa)
        .column("b_lipschitz", lips);
    let ok = worst[..4].iter().all(|v| *v <= constraint_tol);
    let constraints = Certificate::new("gowdy-constraints", Verdict::from_bool(ok))
        .with_tolerance(constraint_tol)
        .with_metric("det", worst[0])
        .with_metric("trace", worst[1])
        .with_metric("connection_trace", worst[2])
        .with_metric("self_adjoint", worst[3])
        .with_metric("b_lipschitz_max", worst[4])
        .with_metric("max_det_correction", traj.max_det_correction)
        .with_metric("max_trace_correction", traj.max_trace_correction)
        .with_metric("steps", traj.steps as f64);
    Ok(Series { table, constraints })
}

fn homogeneous_error(state: &GowdyState, q: &[f64]) -> f64 {
    let t = state.t();
    let exact = DMatrix::from_diagonal(&DVector::from_iterator(q.len(), q.iter().map(|q| t.powf(2.0 * q))));
    state.g().iter().map(|g| (g - &exact).norm() / exact.norm()).fold(0.0, f64::max)
}

pub(crate) fn evolve(p: &GowdyEvolveParams, seed: u64, tol: &Tolerances) -> std::result::Result<ScenarioOutput, RunError> {
    let grid = p.grid()?;
    let state = match &p.initial {
        InitialData::Random { amplitude, velocity_amplitude, band, polarized } => {
            let data = RandomData {
                dim: p.dim,
                amplitude: *amplitude,
                velocity_amplitude: *velocity_amplitude,
                band: *band,
                polarized: *polarized,
            };
            random_state(&grid, &data, seed, p.s0)?
        }
        InitialData::Bessel { mode, amplitude } => PolarizedBessel { mode: *mode, amplitude: *amplitude }.state(&grid, p.s0)?,
        InitialData::Homogeneous { q } => homogeneous_state(&grid, q, &DMatrix::identity(p.dim, p.dim), p.s0)?,
    };
    let mut opts = EvolveOptions::uniform(&grid, p.s0, p.s_end, p.cfl);
    if let Some(count) = p.outputs {
        let span = p.s_end - p.s0;
        opts.outputs = (1..=count).map(|i| p.s0 + span * i as f64 / count as f64).collect();
    }
    opts.ds_max = p.ds_max;
    opts.filter = p.filter;
    let traj = evolve_with(&state, &opts)?;

    let constraint_tol = tol.constraint.unwrap_or(1e-8);
    let mut certs = Vec::new();
    let decay = if p.decay {
        let stride = (traj.len() / 64).max(1);
        Some(decay_certificate(&traj.subsample(stride))?)
    } else {
        None
    };
    let Series { mut table, constraints } = series(&traj, decay.as_ref(), constraint_tol)?;
    certs.push(constraints);
    if traj.len() >= 5 {
        certs.push(energy_identities(&traj, tol.monotone.unwrap_or(1e-9), tol.residual.unwrap_or(1e-4))?);
    }
    certs.push(twist_density_check(&traj, constraint_tol)?);
    match &p.initial {
        InitialData::Bessel { mode, amplitude } => {
            let exact = PolarizedBessel { mode: *mode, amplitude: *amplitude };
            let errors: Vec<f64> = traj.states.iter().map(|s| exact.max_error(s)).collect::<Result<_>>()?;
            certs.push(oracle_certificate("gowdy-bessel-oracle", &errors, tol.oracle.unwrap_or(1e-6)));
            table = table.column("oracle_error", errors);
        }
        InitialData::Homogeneous { q } => {
            let errors: Vec<f64> = traj.states.iter().map(|s| homogeneous_error(s, q)).collect();
            certs.push(oracle_certificate("gowdy-kasner-oracle", &errors, tol.oracle.unwrap_or(1e-10)));
            table = table.column("oracle_error", errors);
        }
        InitialData::Random { .. } => {}
    }
    certs.extend(decay);
    let mut out = ScenarioOutput { files: Vec::new(), certificates: certs };
    out.csv("gowdy_series.csv", &table);
    if p.snapshot {
        let mut bytes = Vec::new();
        write_snapshot(traj.last(), &mut bytes)?;
        out.files.push(("final.gowdy".into(), bytes));
    }
    Ok(out)
}

fn oracle_certificate(name: &str, errors: &[f64], tol: f64) -> Certificate {
    let max = errors.iter().copied().fold(0.0, f64::max);
    Certificate::new(name, Verdict::from_bool(max < tol)).with_tolerance(tol).with_metric("max_error", max)
}

pub(crate) fn analyze(p: &GowdyAnalyzeParams, base: &Path, tol: &Tolerances) -> std::result::Result<ScenarioOutput, RunError> {
    let mut states = Vec::with_capacity(p.snapshots.len());
    for (i, rel) in p.snapshots.iter().enumerate() {
        let path = base.join(rel);
        let file = File::open(&path).map_err(|e| RunError::config(format!("params.snapshots[{i}]"), format!("{}: {e}", path.display())))?;
        states.push(read_snapshot(BufReader::new(file))?);
    }
    states.sort_by(|a, b| a.s().total_cmp(&b.s()));
    let traj = Trajectory::from_states(states)?;
    let s = traj.times();
    let span = s.last().unwrap() - s[0];
    let decay = if p.decay && span >= 3.0 { Some(decay_certificate(&traj)?) } else { None };
    let Series { table, mut constraints } = series(&traj, decay.as_ref(), tol.constraint.unwrap_or(1e-8))?;
    if p.decay && decay.is_none() {
        constraints = constraints.with_note(format!("decay certificate skipped: s-span {span} is below 3"));
    }
    let mut certs = vec![constraints];
    if traj.len() >= 2 {
        certs.push(snapshot_monotonicity(&traj, tol.monotone.unwrap_or(1e-9))?);
    }
    certs.extend(decay);
    let mut out = ScenarioOutput { files: Vec::new(), certificates: certs };
    out.csv("gowdy_snapshots.csv", &table);
    Ok(out)
}

/// `Ê` nonincreasing and `Ẽ` nondecreasing in `T` between consecutive
/// snapshots, relative to `1 + |value|`.
fn snapshot_monotonicity(traj: &Trajectory, tol: f64) -> Result<Certificate> {
    let e: Vec<_> = traj.states.iter().map(energies).collect::<Result<_>>()?;
    let mut hat = 0.0f64;
    let mut tilde = 0.0f64;
    for i in 1..e.len() {
        // states are ordered by increasing s, i.e. decreasing T
        hat = hat.max((e[i - 1].ehat - e[i].ehat) / (1.0 + e[i].ehat.abs()));
        tilde = tilde.max((e[i].etilde - e[i - 1].etilde) / (1.0 + e[i].etilde.abs()));
    }
    Ok(Certificate::new("gowdy-monotonicity", Verdict::from_bool(hat <= tol && tilde <= tol))
        .with_tolerance(tol)
        .with_metric("ehat_monotonicity_violation", hat)
        .with_metric("etilde_monotonicity_violation", tilde))
}
