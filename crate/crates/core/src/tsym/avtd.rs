use rayon::prelude::*;

use super::TsymHistory;
use crate::circle::{hminus_norm_scalar, weighted_tail_integral};
use crate::quad::{fornberg_weights, linear_fit};
use crate::{Certificate, Error, Result, Verdict};

/// Tolerance on the chain `‖q_avtd‖ ≤ ‖q_full‖ + ½‖e^{4U}a²A_θ²‖`.
pub const TRIANGLE_TOL: f64 = 1e-10;

/// The holonomy counts as bounded below when its fitted slope over the final
/// unit of `τ` is at least `−HOLONOMY_SLOPE_TOL·(1 + |mean|)`.
pub const HOLONOMY_SLOPE_TOL: f64 = 1e-8;

/// Fields and norms at one interior time of a `τ`-ordered history.
#[derive(Debug, Clone, PartialEq)]
pub struct AvtdSample {
    pub tau: f64,
    /// `a(a⁻¹U_τ)_τ − ½e^{2τ}e^{4U}A_τ²`.
    pub q_avtd: Vec<f64>,
    /// `q_avtd + ½e^{4U}a²A_θ²`.
    pub q_full: Vec<f64>,
    /// `e^{4U}a²A_θ²`.
    pub forcing: Vec<f64>,
    pub q_avtd_norm: f64,
    pub q_full_norm: f64,
    pub forcing_norm: f64,
    pub holonomy: f64,
}

#[derive(Debug, Clone)]
pub struct AvtdReport {
    pub samples: Vec<AvtdSample>,
    /// `∫e^{2τ}‖e^{4U}a²A_θ²‖²dτ`.
    pub forcing: Certificate,
    /// `∫e^{2τ}‖q_full‖²dτ`.
    pub full: Certificate,
    /// `∫e^{2τ}‖q_avtd‖²dτ`.
    pub avtd: Certificate,
    pub holonomy_bounded_below: bool,
    /// Largest excess of `‖q_avtd‖` over `‖q_full‖ + ½‖forcing‖`, relative
    /// to the right side.
    pub triangle_excess: f64,
    pub implication: Certificate,
}

impl AvtdReport {
    pub fn taus(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.tau).collect()
    }
}

/// Norms in the weighted dual space of `L²(a⁻¹dθ)` against
/// `∮(σ̂² + a²σ̂_θ²)a⁻¹dθ`, at every interior time of the history, and the
/// three integrability certificates with weight `e^{2τ}`.
///
/// The implication certificate checks the logic "holonomy bounded below,
/// forcing integrable and full quantity integrable ⇒ AVTD quantity
/// integrable". The full-quantity premise holds automatically for genuine
/// solutions; truncated expansions need not satisfy it, and then the
/// implication is reported as vacuous.
pub fn avtd_quantities(history: &TsymHistory) -> Result<AvtdReport> {
    let h = history.increasing_tau();
    let m = h.len();
    if m < 10 {
        return Err(Error::InsufficientSamples { needed: 10, got: m });
    }
    let taus = h.taus();
    let states = h.states();
    for st in states {
        st.rates()?;
    }
    let samples: Vec<Result<AvtdSample>> = (1..m - 1)
        .into_par_iter()
        .map(|i| {
            let st = &states[i];
            let grid = st.grid();
            let f = st.fields();
            let rates = st.rates()?;
            let w = fornberg_weights(taus[i], &taus[i - 1..=i + 1], 1);
            // U_τ = −R·U_R
            let ratio = |j: usize, p: usize| {
                let s = &states[j];
                -s.r() * s.rates().expect("checked above").u[p] / s.fields().a[p]
            };
            let at = st.big_a_theta()?;
            let tau = taus[i];
            let n = grid.len();
            let mut q_avtd = Vec::with_capacity(n);
            let mut q_full = Vec::with_capacity(n);
            let mut forcing = Vec::with_capacity(n);
            #[allow(clippy::needless_range_loop)]
            for p in 0..n {
                let a = f.a[p];
                let e4u = (4.0 * f.u[p]).exp();
                let d = w[0] * ratio(i - 1, p) + w[1] * ratio(i, p) + w[2] * ratio(i + 1, p);
                let a_tau = -st.r() * rates.big_a[p];
                let qa = a * d - 0.5 * (2.0 * tau).exp() * e4u * a_tau * a_tau;
                let fo = e4u * a * a * at[p] * at[p];
                q_avtd.push(qa);
                forcing.push(fo);
                q_full.push(qa + 0.5 * fo);
            }
            let norm = |v: &[f64]| hminus_norm_scalar(v, &f.a, grid).map(|n| n.value);
            Ok(AvtdSample {
                tau,
                q_avtd_norm: norm(&q_avtd)?,
                q_full_norm: norm(&q_full)?,
                forcing_norm: norm(&forcing)?,
                holonomy: grid.integrate(&f.h_conn),
                q_avtd,
                q_full,
                forcing,
            })
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;

    let tau: Vec<f64> = samples.iter().map(|s| s.tau).collect();
    let squares = |g: fn(&AvtdSample) -> f64| -> Vec<f64> { samples.iter().map(|s| g(s).powi(2)).collect() };
    let named = |mut c: Certificate, name: &str| {
        c.name = name.into();
        c
    };
    let forcing = named(weighted_tail_integral(&tau, &squares(|s| s.forcing_norm), 2.0)?, "tsym-forcing-integrability");
    let full = named(weighted_tail_integral(&tau, &squares(|s| s.q_full_norm), 2.0)?, "tsym-full-integrability");
    let avtd = named(weighted_tail_integral(&tau, &squares(|s| s.q_avtd_norm), 2.0)?, "tsym-avtd-integrability");

    let holonomy: Vec<f64> = samples.iter().map(|s| s.holonomy).collect();
    let tau_end = *tau.last().unwrap();
    let start = tau.iter().position(|&t| t >= tau_end - 1.0).unwrap_or(0).min(tau.len() - 2);
    let (slope, _) = linear_fit(&tau[start..], &holonomy[start..]);
    let mean = holonomy.iter().sum::<f64>() / holonomy.len() as f64;
    let holonomy_bounded_below = holonomy.iter().all(|h| h.is_finite()) && slope >= -HOLONOMY_SLOPE_TOL * (1.0 + mean.abs());

    let triangle_excess = samples
        .iter()
        .map(|s| {
            let rhs = s.q_full_norm + 0.5 * s.forcing_norm;
            (s.q_avtd_norm - rhs) / rhs.max(f64::MIN_POSITIVE)
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let premise = holonomy_bounded_below && forcing.verdict.is_ok() && full.verdict.is_ok();
    let conclusion = avtd.verdict.is_ok() && triangle_excess <= TRIANGLE_TOL;
    let verdict = if !premise {
        Verdict::Vacuous
    } else {
        Verdict::from_bool(conclusion)
    };
    let mut implication = Certificate::new("tsym-implication", verdict)
        .with_metric("triangle_excess", triangle_excess)
        .with_metric("holonomy_tail_slope", slope)
        .with_metric("holonomy_min", holonomy.iter().cloned().fold(f64::INFINITY, f64::min))
        .with_metric("forcing_tail_slope", forcing.metric("tail_slope"))
        .with_metric("full_tail_slope", full.metric("tail_slope"))
        .with_metric("avtd_tail_slope", avtd.metric("tail_slope"))
        .with_tolerance(TRIANGLE_TOL)
        .with_samples("holonomy", holonomy);
    if !holonomy_bounded_below {
        implication = implication.with_note("holonomy still decreasing at the end of the history");
    }
    if !forcing.verdict.is_ok() {
        implication = implication.with_note("forcing integral not convergent");
    }
    if !full.verdict.is_ok() {
        implication = implication.with_note("full quantity not integrable (not a solution, or not yet asymptotic)");
    }
    Ok(AvtdReport { samples, forcing, full, avtd, holonomy_bounded_below, triangle_excess, implication })
}
