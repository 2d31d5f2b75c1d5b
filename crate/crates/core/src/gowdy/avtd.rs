use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{GowdyState, Trajectory};
use crate::circle::{hminus_norm_matrix, weighted_tail_integral};
use crate::symmat::{covariant_dy_raw, field_derivative, spd_inverse, SelfAdjointSection};
use crate::{Certificate, Error, Result, Verdict};

/// `(G⁻¹G_s)_s = e^{−2s}(G⁻¹G_y)_y`, returned through its lowered form
/// `e^{−2s}(G_yy − G_yG⁻¹G_y)`. The areal-time defect `(G⁻¹G_τ)_τ` with
/// `τ = (2/N)s` is this times `(N/2)²`.
pub fn avtd_defect(state: &GowdyState) -> Result<SelfAdjointSection> {
    let grid = state.grid();
    let gy = field_derivative(grid, state.g())?;
    let gyy = field_derivative(grid, &gy)?;
    let damp = (-2.0 * state.s()).exp();
    let lowered = state
        .g()
        .iter()
        .zip(gy.iter().zip(&gyy))
        .map(|(g, (gy, gyy))| (gyy - gy * spd_inverse(g) * gy) * damp)
        .collect();
    SelfAdjointSection::from_lowered(lowered, state.metric()?)
}

/// Integrability of `W(s) = e^{2s}‖(G⁻¹G_s)_s‖²_{H⁻¹(μ)}` with `μ = 2dy`,
/// the `s`-form of `∫e^{Nτ}‖(G⁻¹G_τ)_τ‖²dτ < ∞`. Reports the running
/// integral and the fitted tail exponent; the verdict is growing or
/// convergent-so-far, never a judgement on the exponent's value.
pub fn decay_certificate(traj: &Trajectory) -> Result<Certificate> {
    let s = traj.times();
    let span = s.last().unwrap() - s[0];
    if span.abs() < 3.0 {
        return Err(Error::InvalidInput(format!("decay certificate needs an s-span of at least 3, got {span}")));
    }
    let norms: Vec<Result<(f64, f64)>> = traj
        .states
        .par_iter()
        .map(|st| {
            let d = avtd_defect(st)?;
            let n = hminus_norm_matrix(&d, &st.mu(), st.grid())?;
            Ok((n.value, n.l2))
        })
        .collect();
    let mut w = Vec::with_capacity(s.len());
    let mut l2 = Vec::with_capacity(s.len());
    for (r, si) in norms.into_iter().zip(&s) {
        let (h, l) = r?;
        w.push((2.0 * si).exp() * h * h);
        l2.push(l);
    }
    let mut cert = weighted_tail_integral(&s, &w, 0.0)?;
    cert.name = "gowdy-decay".into();
    Ok(cert.with_samples("W", w).with_samples("defect_l2", l2))
}

/// Test section for the weak formulation: a smooth bump in `s` supported on
/// `[start, end]` times either the identity or `G⁻¹S₀(y)`.
#[derive(Debug, Clone)]
pub struct WeakTestSection {
    pub start: f64,
    pub end: f64,
    /// `None` selects the identity.
    pub lowered: Option<Vec<DMatrix<f64>>>,
}

impl WeakTestSection {
    fn bump(&self, s: f64) -> (f64, f64) {
        let half = 0.5 * (self.end - self.start);
        let x = (s - 0.5 * (self.start + self.end)) / half;
        if x.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - x * x;
        let b = (-1.0 / q).exp();
        (b, b * (-2.0 * x / (q * q)) / half)
    }
}

/// Weak form of the evolution equation,
/// `∬Tr(σ_sÃ)dμ ds = ∬2e^{−2s}Tr((D_yσ)(G⁻¹G_y))dy ds`, integrated by the
/// trapezoid rule over the trajectory's output times. The mismatch is
/// relative to `∬|Tr(σ_sÃ)|dμ ds`.
pub fn weak_form_check(traj: &Trajectory, test: &WeakTestSection, tol: f64) -> Result<Certificate> {
    let s = traj.times();
    let (lo, hi) = (s[0].min(*s.last().unwrap()), s[0].max(*s.last().unwrap()));
    if !(test.start > lo && test.end < hi && test.start < test.end) {
        return Err(Error::InvalidInput(format!(
            "test section support [{}, {}] must lie inside ({lo}, {hi})",
            test.start, test.end
        )));
    }
    let rows: Vec<Result<(f64, f64, f64)>> = traj
        .states
        .par_iter()
        .map(|st| {
            let (b, db) = test.bump(st.s());
            if b == 0.0 && db == 0.0 {
                return Ok((0.0, 0.0, 0.0));
            }
            let grid = st.grid();
            let a = st.atilde();
            let conn = st.connection()?;
            let n = st.dim();
            let (sigma, sigma_s): (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) = match &test.lowered {
                None => (vec![DMatrix::identity(n, n) * b; grid.len()], vec![DMatrix::identity(n, n) * db; grid.len()]),
                Some(l) => st
                    .g()
                    .iter()
                    .zip(l)
                    .zip(&a)
                    .map(|((g, s0), a)| {
                        let base = spd_inverse(g) * s0;
                        (&base * b, &base * db - a * &base * b)
                    })
                    .unzip(),
            };
            let dsig = covariant_dy_raw(&sigma, &st.metric()?, grid)?;
            let left: Vec<f64> = sigma_s.iter().zip(&a).map(|(x, a)| 2.0 * (x * a).trace()).collect();
            let abs: Vec<f64> = left.iter().map(|v| v.abs()).collect();
            let damp = (-2.0 * st.s()).exp();
            let right: Vec<f64> = dsig.iter().zip(&conn).map(|(d, c)| 2.0 * damp * (d * c).trace()).collect();
            Ok((grid.integrate(&left), grid.integrate(&right), grid.integrate(&abs)))
        })
        .collect();
    let mut l = Vec::with_capacity(s.len());
    let mut r = Vec::with_capacity(s.len());
    let mut a = Vec::with_capacity(s.len());
    for row in rows {
        let (x, y, z) = row?;
        l.push(x);
        r.push(y);
        a.push(z);
    }
    let trap = |v: &[f64]| *crate::quad::cumulative_trapezoid(&s, v).last().unwrap();
    let (lhs, rhs, scale) = (trap(&l), trap(&r), trap(&a).abs());
    let mismatch = (lhs - rhs).abs();
    let relative = if scale > 0.0 { mismatch / scale } else { mismatch };
    Ok(Certificate::new("gowdy-weak-form", Verdict::from_bool(relative < tol))
        .with_metric("lhs", lhs)
        .with_metric("rhs", rhs)
        .with_metric("mismatch", mismatch)
        .with_metric("relative_mismatch", relative)
        .with_tolerance(tol))
}

/// Time independence of the twist density `μ = √det G·∂_T(ln det G)dy`,
/// which is `2dy` in the conformal gauge.
pub fn twist_density_check(traj: &Trajectory, tol: f64) -> Result<Certificate> {
    if traj.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: traj.len() });
    }
    let mut worst = 0.0f64;
    let mut masses = Vec::with_capacity(traj.len());
    for st in &traj.states {
        let mu = st.twist_density();
        worst = mu.iter().fold(worst, |a, m| a.max((m - 2.0).abs()));
        masses.push(st.grid().integrate(&mu));
    }
    let length = traj.states[0].grid().length();
    Ok(Certificate::new("gowdy-twist-density", Verdict::from_bool(worst < tol))
        .with_metric("max_deviation", worst)
        .with_metric("expected_mass", 2.0 * length)
        .with_tolerance(tol)
        .with_samples("mass", masses))
}
