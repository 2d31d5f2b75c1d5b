use serde::{Deserialize, Serialize};

use super::config::positive;
use super::{RunError, ScenarioOutput, Table, Tolerances};
use crate::cmc::{
    causal_radius, curvature_report, disjointness, dvol0_limit, evolve_cmc, kasner_limit_check, kasner_reconstruct, lapse_bounds,
    make_family, monotone_quantities, v1_integral_identity, CmcTrajectory, Family, FamilySpec, FlowSource, MultiWarpedFlow, Rescaled,
    DVOL0_ZERO_TOL,
};
use crate::{Certificate, Error, Result, Verdict};

fn one() -> usize {
    1
}

fn default_samples() -> usize {
    401
}

fn default_lambda() -> f64 {
    4.0
}

fn default_scales() -> Vec<f64> {
    vec![1.0, 1e-2, 1e-4]
}

fn default_levels() -> usize {
    20
}

fn default_lambdas() -> Vec<f64> {
    vec![2.0, 10.0, 100.0]
}

fn yes() -> bool {
    true
}

/// The Kasner exponents that the rescaled Kantowski–Sachs flow approaches,
/// ordered as its (circle, sphere) blocks.
const KS_LIMIT_EXPONENTS: [f64; 2] = [-1.0 / 3.0, 2.0 / 3.0];
/// Agreement required of the Kantowski–Sachs rescaling limit at the
/// smallest scale.
const KS_LIMIT_TOL: f64 = 1e-3;

fn family_of(spec: &FamilySpec, path: &str) -> std::result::Result<Family, RunError> {
    make_family(spec).map_err(|e| RunError::config(path, e.to_string()))
}

fn time_range(path: &str, lo: f64, hi: f64) -> std::result::Result<(), RunError> {
    positive(path, lo)?;
    positive(path, hi)?;
    if lo == hi {
        return Err(RunError::config(path, "the two times must differ"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmcEvolveParams {
    pub family: FamilySpec,
    /// Initial data is the family at `t_start`.
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    /// Write every `stride`-th step to the CSV.
    #[serde(default = "one")]
    pub stride: usize,
}

impl CmcEvolveParams {
    pub(crate) fn validate(&self) -> std::result::Result<(), RunError> {
        family_of(&self.family, "params.family")?;
        time_range("params.t_start/t_end", self.t_start, self.t_end)?;
        if self.steps < 4 {
            return Err(RunError::config("params.steps", "needs at least 4 steps"));
        }
        if self.stride == 0 {
            return Err(RunError::config("params.stride", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmcFamilyParams {
    pub family: FamilySpec,
    /// Samples are log-spaced on `[t_min, t_max]`.
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// `Λ` of the rescaling-limit integrals over `[Λ⁻¹, Λ]`.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    /// Halvings of `t_max` for the `dvol₀` extrapolation.
    #[serde(default = "default_levels")]
    pub dvol0_levels: usize,
    #[serde(default = "yes")]
    pub curvature: bool,
}

fn default_t_min() -> f64 {
    0.1
}

fn default_t_max() -> f64 {
    1.0
}

impl CmcFamilyParams {
    pub(crate) fn validate(&self) -> std::result::Result<(), RunError> {
        family_of(&self.family, "params.family")?;
        time_range("params.t_min/t_max", self.t_min, self.t_max)?;
        if self.t_min > self.t_max {
            return Err(RunError::config("params.t_min", "must be below t_max"));
        }
        if self.samples < 5 {
            return Err(RunError::config("params.samples", "needs at least 5 samples"));
        }
        if !(self.lambda > 1.0 && self.lambda.is_finite()) {
            return Err(RunError::config("params.lambda", "must exceed 1"));
        }
        if self.scales.is_empty() {
            return Err(RunError::config("params.scales", "needs at least one scale"));
        }
        for (i, s) in self.scales.iter().enumerate() {
            positive(&format!("params.scales[{i}]"), *s)?;
        }
        if self.dvol0_levels < 14 {
            return Err(RunError::config("params.dvol0_levels", "needs at least 14 halvings"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalParams {
    pub family: FamilySpec,
    pub block: usize,
    /// Upper end `t` of every interval.
    pub t: f64,
    /// Intervals `[t/Λ, t]`.
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Also integrate over `[0, t]`.
    #[serde(default = "yes")]
    pub from_zero: bool,
    /// Coordinate separation for the disjointness test.
    #[serde(default)]
    pub separation: Option<f64>,
}

impl CausalParams {
    pub(crate) fn validate(&self) -> std::result::Result<(), RunError> {
        let fam = family_of(&self.family, "params.family")?;
        positive("params.t", self.t)?;
        let blocks = fam.flow_at(self.t).map_err(|e| RunError::config("params.t", e.to_string()))?.blocks.len();
        if self.block >= blocks {
            return Err(RunError::config("params.block", format!("the family has {blocks} blocks")));
        }
        for (i, l) in self.lambdas.iter().enumerate() {
            if !(*l > 1.0 && l.is_finite()) {
                return Err(RunError::config(format!("params.lambdas[{i}]"), "must exceed 1"));
            }
        }
        if let Some(d) = self.separation {
            positive("params.separation", d)?;
        }
        if self.lambdas.is_empty() && !self.from_zero {
            return Err(RunError::config("params.lambdas", "nothing to compute"));
        }
        Ok(())
    }
}

/// `t, a_i, κ_i, L, R, H, V_n, V_1` and the constraint residuals.
fn flow_table(flows: &[&MultiWarpedFlow]) -> Table {
    let col = |f: &dyn Fn(&MultiWarpedFlow) -> f64| flows.iter().map(|x| f(x)).collect::<Vec<f64>>();
    let mut t = Table::new().column("t", col(&|f| f.t));
    let blocks = flows.first().map_or(0, |f| f.blocks.len());
    for i in 0..blocks {
        t = t.column(format!("a_{i}"), col(&|f| f.blocks[i].scale));
    }
    for i in 0..blocks {
        t = t.column(format!("kappa_{i}"), col(&|f| f.blocks[i].kappa));
    }
    t.column("L", col(&MultiWarpedFlow::lapse))
        .column("R", col(&MultiWarpedFlow::scalar_curvature))
        .column("H", col(&MultiWarpedFlow::mean_curvature))
        .column("V_n", col(&MultiWarpedFlow::v_n))
        .column("V_1", col(&MultiWarpedFlow::v_1))
        .column("constraint_residual", col(&MultiWarpedFlow::constraint_drift))
        .column("hubble_residual", col(&MultiWarpedFlow::hubble_drift))
}

/// Largest of `|Δa|/a` and `t|Δκ|` over the blocks.
fn state_error(a: &MultiWarpedFlow, b: &MultiWarpedFlow) -> f64 {
    a.blocks
        .iter()
        .zip(&b.blocks)
        .map(|(x, y)| ((x.scale - y.scale) / y.scale).abs().max(b.t * (x.kappa - y.kappa).abs()))
        .fold(0.0, f64::max)
}

pub(crate) fn evolve(p: &CmcEvolveParams, tol: &Tolerances) -> std::result::Result<ScenarioOutput, RunError> {
    let fam = make_family(&p.family)?;
    let tr = evolve_cmc(&fam.flow_at(p.t_start)?, p.t_end, p.steps)?;
    let errors: Vec<f64> = tr.flows().iter().map(|f| Ok(state_error(f, &fam.flow_at(f.t)?))).collect::<Result<_>>()?;
    let oracle_tol = tol.oracle.unwrap_or(1e-7);
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    let constraint_tol = tol.constraint.unwrap_or(1e-6);
    let drift = tr.max_constraint_drift();
    let certs = vec![
        Certificate::new("cmc-closed-form", Verdict::from_bool(max_error <= oracle_tol))
            .with_tolerance(oracle_tol)
            .with_metric("max_error", max_error),
        Certificate::new("cmc-constraints", Verdict::from_bool(drift <= constraint_tol))
            .with_tolerance(constraint_tol)
            .with_metric("max_constraint_drift", drift)
            .with_metric("max_hubble_drift", tr.max_hubble_drift()),
        monotone_quantities(&tr, tol.residual.unwrap_or(1e-6))?,
        lapse_bounds(tr.flows(), tol.lapse.unwrap_or(1e-9)),
        v1_integral_identity(&tr, 1e-8)?,
    ];
    let rows: Vec<usize> = (0..tr.len()).filter(|i| i % p.stride == 0 || *i + 1 == tr.len()).collect();
    let flows: Vec<&MultiWarpedFlow> = rows.iter().map(|&i| &tr.flows()[i]).collect();
    let table = flow_table(&flows).column("closed_form_error", rows.iter().map(|&i| errors[i]).collect());
    let mut out = ScenarioOutput { files: Vec::new(), certificates: certs };
    out.csv("cmc_trajectory.csv", &table);
    Ok(out)
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| if i + 1 == count { hi } else { lo * (r * i as f64).exp() }).collect()
}

/// `Vacuous` with the message when the check's hypothesis fails.
fn or_vacuous(name: &str, r: Result<Certificate>) -> Result<Certificate> {
    match r {
        Err(Error::Hypothesis(msg)) => Ok(Certificate::new(name, Verdict::Vacuous).with_note(msg)),
        other => other,
    }
}

pub(crate) fn family(p: &CmcFamilyParams, tol: &Tolerances) -> std::result::Result<ScenarioOutput, RunError> {
    let fam = make_family(&p.family)?;
    let times = log_spaced(p.t_min, p.t_max, p.samples);
    let flows = times.iter().map(|&t| fam.flow_at(t)).collect::<Result<Vec<_>>>()?;
    let tr = CmcTrajectory::new(flows)?;
    let mut certs = vec![monotone_quantities(&tr, tol.residual.unwrap_or(1e-6))?, lapse_bounds(tr.flows(), tol.lapse.unwrap_or(1e-12))];

    let closed = fam.dvol0();
    let dvol0 = match dvol0_limit(&fam, p.t_max, p.dvol0_levels) {
        Ok(d) => {
            let expected = closed;
            let ok = match expected {
                Some(0.0) => d.zero,
                Some(c) => !d.zero && (d.value - c).abs() <= 1e-6 * c,
                None => true,
            };
            let mut c = Certificate::new("cmc-dvol0", Verdict::from_bool(ok))
                .with_metric("value", d.value)
                .with_metric("zero", if d.zero { 1.0 } else { 0.0 })
                .with_tolerance(DVOL0_ZERO_TOL)
                .with_samples("t", d.times)
                .with_samples("mass", d.masses);
            if let Some(e) = expected {
                c = c.with_metric("closed_form", e);
            }
            certs.push(c);
            Some(closed.unwrap_or(if d.zero { 0.0 } else { d.value }))
        }
        Err(Error::Hypothesis(msg)) => {
            certs.push(Certificate::new("cmc-dvol0", Verdict::Vacuous).with_note(msg));
            None
        }
        Err(e) => return Err(e.into()),
    };
    match dvol0 {
        Some(mass) => certs.push(or_vacuous("cmc-kasner-limit", kasner_limit_check(&fam, mass, p.lambda, &p.scales))?),
        None => certs.push(Certificate::new("cmc-kasner-limit", Verdict::Vacuous).with_note("no dvol0: R > 0 along the family")),
    }
    if let Family::KantowskiSachs { .. } = fam {
        certs.push(ks_rescaling(&fam, &p.scales)?);
    }
    if let Family::Kasner { .. } = fam {
        let picks = log_spaced(p.t_min, p.t_max, 11);
        let history = picks.iter().map(|&t| fam.matrix_at(t)).collect::<Result<Vec<_>>>()?;
        certs.push(kasner_reconstruct(&history, tol.reconstruct.unwrap_or(1e-9))?.certificate);
    }
    if p.curvature {
        let picks = log_spaced(p.t_min, p.t_max, 5);
        let rep = curvature_report(&fam, &picks)?;
        let lo = rep.scaled_norm.iter().copied().fold(f64::INFINITY, f64::min);
        let ok = rep.scaled_norm.iter().all(|v| v.is_finite());
        certs.push(
            Certificate::new("cmc-type-i", Verdict::from_bool(ok))
                .with_metric("type_i_constant", rep.type_i_constant)
                .with_metric("relative_spread", (rep.type_i_constant - lo) / rep.type_i_constant.max(f64::MIN_POSITIVE))
                .with_samples("t", rep.t)
                .with_samples("t2_rm_norm", rep.scaled_norm),
        );
    }
    let rows: Vec<&MultiWarpedFlow> = tr.flows().iter().collect();
    let mut out = ScenarioOutput { files: Vec::new(), certificates: certs };
    out.csv("cmc_family.csv", &flow_table(&rows));
    Ok(out)
}

/// Block exponents `pᵢ = −Lκᵢu` of the rescaled flow at `u = 1`, against
/// the Kasner limit; judged at the smallest scale.
fn ks_rescaling(fam: &Family, scales: &[f64]) -> Result<Certificate> {
    let mut deviation = Vec::with_capacity(scales.len());
    for &s in scales {
        let f = Rescaled::new(fam, s)?.flow_at(1.0)?;
        let l = f.lapse();
        let d = f.blocks.iter().zip(KS_LIMIT_EXPONENTS).map(|(b, p)| (-l * b.kappa * f.t - p).abs()).fold(0.0, f64::max);
        deviation.push(d);
    }
    let smallest = scales.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    Ok(Certificate::new("cmc-ks-rescaling", Verdict::from_bool(deviation[smallest] <= KS_LIMIT_TOL))
        .with_tolerance(KS_LIMIT_TOL)
        .with_metric("deviation", deviation[smallest])
        .with_samples("scale", scales.to_vec())
        .with_samples("deviation", deviation))
}

pub(crate) fn causal(p: &CausalParams) -> std::result::Result<ScenarioOutput, RunError> {
    let fam = make_family(&p.family)?;
    let mut lows: Vec<f64> = p.lambdas.iter().map(|l| p.t / l).collect();
    if p.from_zero {
        lows.push(0.0);
    }
    let radii = lows.iter().map(|&lo| causal_radius(&fam, p.block, lo, p.t)).collect::<Result<Vec<_>>>()?;
    let mut table = Table::new()
        .column("t_low", lows.clone())
        .column("t_high", vec![p.t; lows.len()])
        .column("radius", radii.iter().map(|r| r.radius).collect())
        .sparse_column("exponent", radii.iter().map(|r| r.exponent).collect())
        .column("diameter_bound", radii.iter().map(|r| r.diameter_bound).collect());
    let mut certs = Vec::new();
    if let Family::Kasner { exponents, .. } = &fam {
        // a_i = t^{p_i} and L = 1/n give ∫ s^{−p}/n ds
        let (pi, n) = (exponents[p.block], exponents.len() as f64);
        let exact: Vec<f64> = lows
            .iter()
            .map(|&lo| {
                if pi >= 1.0 && lo == 0.0 {
                    f64::INFINITY
                } else if pi == 1.0 {
                    (p.t / lo).ln() / n
                } else {
                    (p.t.powf(1.0 - pi) - lo.powf(1.0 - pi)) / (n * (1.0 - pi))
                }
            })
            .collect();
        let err = radii
            .iter()
            .zip(&exact)
            .map(|(r, e)| if r.radius.is_infinite() && e.is_infinite() { 0.0 } else { (r.radius - e).abs() / e.abs() })
            .fold(0.0, f64::max);
        certs.push(
            Certificate::new("cmc-causal-closed-form", Verdict::from_bool(err <= 1e-10))
                .with_tolerance(1e-10)
                .with_metric("max_relative_error", err),
        );
        table = table.column("closed_form", exact);
    }
    if let Some(d) = p.separation {
        let flags = p
            .lambdas
            .iter()
            .map(|&l| disjointness(&fam, p.block, d, l, p.t).map(|b| Some(if b { 1.0 } else { 0.0 })))
            .collect::<Result<Vec<_>>>()?;
        let mut col = flags;
        col.resize(lows.len(), None);
        table = table.sparse_column("disjoint", col);
    }
    let mut out = ScenarioOutput { files: Vec::new(), certificates: certs };
    out.csv("causal_radii.csv", &table);
    Ok(out)
}
