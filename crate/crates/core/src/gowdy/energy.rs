use serde::{Deserialize, Serialize};

use super::{GowdyState, Trajectory};
use crate::quad::centred_derivative;
use crate::{Certificate, Error, Result, Verdict};

/// Energies of a Gowdy state in the conformal gauge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GowdyEnergies {
    pub e: f64,
    pub ehat: f64,
    pub etilde: f64,
}

/// Spatial integrals `∮Tr(Â²)dy` and `∮Tr(B²)dy` with `Â = G⁻¹G_T`.
pub fn energy_densities(state: &GowdyState) -> Result<(f64, f64)> {
    let grid = state.grid();
    let t = state.t();
    let a: Vec<f64> = state.atilde().iter().map(|a| (a * a).trace() / (t * t)).collect();
    let b: Vec<f64> = state.connection()?.iter().map(|b| (b * b).trace()).collect();
    Ok((grid.integrate(&a), grid.integrate(&b)))
}

/// `Ê = ½∮[Tr(Â²) + Tr(B²)]dy`, `Ẽ = T²Ê` and `E = 2(dT/dt)Ê` with areal
/// time `t = T^{2/N}`.
pub fn energies(state: &GowdyState) -> Result<GowdyEnergies> {
    let (a2, b2) = energy_densities(state)?;
    let ehat = 0.5 * (a2 + b2);
    let t = state.t();
    let n = state.dim() as f64;
    let dtdt = 0.5 * n * t.powf((n - 2.0) / n);
    Ok(GowdyEnergies { e: 2.0 * dtdt * ehat, ehat, etilde: t * t * ehat })
}

/// Finite-difference check of `dÊ/dT = −(1/T)∮Tr(Â²)dy` and
/// `dẼ/dT = T∮Tr(B²)dy` along a trajectory, the monotonicity of both
/// energies between adjacent samples, and the running bound integral
/// `Ẽ(s₀) − Ẽ(s) = ∫e^{−2s}∮Tr(B²)dy ds`.
///
/// Residuals are sup-norm differences divided by the sup of the right-hand
/// side. Derivatives in `s` use the centred five-point stencil on the output
/// times, so the first and last two samples only enter as stencil points.
pub fn energy_identities(traj: &Trajectory, monotone_tol: f64, residual_tol: f64) -> Result<Certificate> {
    let m = traj.len();
    if m < 5 {
        return Err(Error::InsufficientSamples { needed: 5, got: m });
    }
    let s = traj.times();
    let mut ehat = Vec::with_capacity(m);
    let mut etilde = Vec::with_capacity(m);
    let mut rhs_hat = Vec::with_capacity(m);
    let mut rhs_tilde = Vec::with_capacity(m);
    for st in &traj.states {
        let en = energies(st)?;
        let (a2, b2) = energy_densities(st)?;
        let t = st.t();
        ehat.push(en.ehat);
        etilde.push(en.etilde);
        rhs_hat.push(-a2 / t);
        rhs_tilde.push(t * b2);
    }
    // d/dT = −e^{s} d/ds, evaluated where the centred stencil fits
    let to_t = |d: Vec<f64>| -> Vec<f64> { d.iter().zip(&s[2..]).map(|(d, s)| -s.exp() * d).collect() };
    let lhs_hat = to_t(centred_derivative(&s, &ehat, 2));
    let lhs_tilde = to_t(centred_derivative(&s, &etilde, 2));
    let rhs_hat = &rhs_hat[2..m - 2];
    let rhs_tilde = &rhs_tilde[2..m - 2];
    let rel = |lhs: &[f64], rhs: &[f64]| {
        let scale = rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let diff = lhs.iter().zip(rhs).fold(0.0f64, |a, (l, r)| a.max((l - r).abs()));
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    };
    let res_hat = rel(&lhs_hat, rhs_hat);
    let res_tilde = rel(&lhs_tilde, rhs_tilde);

    // s increases toward the singularity: Ê must not decrease in s, Ẽ must
    // not increase.
    let dir = (s[m - 1] - s[0]).signum();
    let mut worst_hat = 0.0f64;
    let mut worst_tilde = 0.0f64;
    for i in 1..m {
        let dh = dir * (ehat[i - 1] - ehat[i]) / (1.0 + ehat[i].abs());
        let dt = dir * (etilde[i] - etilde[i - 1]) / (1.0 + etilde[i].abs());
        worst_hat = worst_hat.max(dh);
        worst_tilde = worst_tilde.max(dt);
    }
    let bound_scale = traj.bound_integral.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let bound_diff = (0..m)
        .map(|i| (etilde[0] - etilde[i] - traj.bound_integral[i]).abs())
        .fold(0.0f64, f64::max);
    let bound_residual = if bound_scale > 0.0 { bound_diff / bound_scale } else { bound_diff };

    let ok = worst_hat <= monotone_tol && worst_tilde <= monotone_tol && res_hat < residual_tol && res_tilde < residual_tol;
    Ok(Certificate::new("gowdy-energy-identities", Verdict::from_bool(ok))
        .with_metric("ehat_residual", res_hat)
        .with_metric("etilde_residual", res_tilde)
        .with_metric("ehat_monotonicity_violation", worst_hat.max(0.0))
        .with_metric("etilde_monotonicity_violation", worst_tilde.max(0.0))
        .with_metric("bound_residual", bound_residual)
        .with_tolerance(residual_tol)
        .with_samples("s", s)
        .with_samples("ehat", ehat)
        .with_samples("etilde", etilde)
        .with_samples("bound_integral", traj.bound_integral.clone()))
}
