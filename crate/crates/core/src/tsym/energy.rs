use serde::{Deserialize, Serialize};

use super::{TsymHistory, TsymState};
use crate::quad::centred_derivative;
use crate::{Certificate, Error, Result, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsymEnergies {
    /// `∮𝒟dθ` with `𝒟 = a⁻¹U_R² + aU_θ² + ¼R⁻²e^{4U}(a⁻¹A_R² + aA_θ²)`.
    pub d_integral: f64,
    /// `Ê_K = ∮(𝒟 + ¼K²R⁻⁴e^{2η}a⁻¹)dθ`.
    pub ehat_k: f64,
    /// `Ẽ_K = R²Ê_K + ½K∮H dθ`.
    pub etilde_k: f64,
    /// `∮H dθ`.
    pub holonomy: f64,
}

pub fn energies_k(state: &TsymState) -> Result<TsymEnergies> {
    let rates = state.rates()?;
    let f = state.fields();
    let grid = state.grid();
    let (r, k) = (state.r(), state.twist());
    let ut = state.u_theta()?;
    let at = state.big_a_theta()?;
    let mut d = Vec::with_capacity(grid.len());
    let mut twist_term = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let a = f.a[i];
        let e4u = (4.0 * f.u[i]).exp();
        d.push(
            rates.u[i].powi(2) / a
                + a * ut[i].powi(2)
                + 0.25 / (r * r) * e4u * (rates.big_a[i].powi(2) / a + a * at[i].powi(2)),
        );
        twist_term.push(0.25 * k * k / r.powi(4) * (2.0 * f.eta[i]).exp() / a);
    }
    let d_integral = grid.integrate(&d);
    let ehat_k = d_integral + grid.integrate(&twist_term);
    let holonomy = grid.integrate(&f.h_conn);
    Ok(TsymEnergies { d_integral, ehat_k, etilde_k: r * r * ehat_k + 0.5 * k * holonomy, holonomy })
}

/// Right-hand sides `dẼ_K/dR = 2R∮(aU_θ² + ¼R⁻²e^{4U}a⁻¹A_R²)dθ` and
/// `dÊ_K/dR = −2R⁻¹∮(a⁻¹U_R² + ¼R⁻²e^{4U}aA_θ²)dθ − K²R⁻⁵∮a⁻¹e^{2η}dθ`.
pub fn energy_rates(state: &TsymState) -> Result<(f64, f64)> {
    let rates = state.rates()?;
    let f = state.fields();
    let grid = state.grid();
    let (r, k) = (state.r(), state.twist());
    let ut = state.u_theta()?;
    let at = state.big_a_theta()?;
    let mut tilde = Vec::with_capacity(grid.len());
    let mut hat = Vec::with_capacity(grid.len());
    let mut twist = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let a = f.a[i];
        let e4u = (4.0 * f.u[i]).exp();
        tilde.push(a * ut[i].powi(2) + 0.25 / (r * r) * e4u * rates.big_a[i].powi(2) / a);
        hat.push(rates.u[i].powi(2) / a + 0.25 / (r * r) * e4u * a * at[i].powi(2));
        twist.push((2.0 * f.eta[i]).exp() / a);
    }
    let d_tilde = 2.0 * r * grid.integrate(&tilde);
    let d_hat = -2.0 / r * grid.integrate(&hat) - k * k / r.powi(5) * grid.integrate(&twist);
    Ok((d_tilde, d_hat))
}

/// Centred five-point derivatives in `R` of `Ẽ_K` and `Ê_K` against
/// [`energy_rates`], at the interior samples of the history.
///
/// Residuals are sup-norm differences relative to the sup of the right-hand
/// side (absolute when that vanishes); the defects themselves are returned as
/// samples. The verdict also requires `Ẽ_K` nondecreasing in `R` between
/// adjacent samples, to `1e-9·(1+|Ẽ_K|)`.
pub fn monotonicity_residual(history: &TsymHistory, tol: f64) -> Result<Certificate> {
    let m = history.len();
    if m < 5 {
        return Err(Error::InsufficientSamples { needed: 5, got: m });
    }
    let h = history.increasing_r();
    let r = h.r_values();
    let mut ehat = Vec::with_capacity(m);
    let mut etilde = Vec::with_capacity(m);
    let mut holonomy = Vec::with_capacity(m);
    let mut rhs_tilde = Vec::with_capacity(m);
    let mut rhs_hat = Vec::with_capacity(m);
    for st in h.states() {
        let e = energies_k(st)?;
        let (dt, dh) = energy_rates(st)?;
        ehat.push(e.ehat_k);
        etilde.push(e.etilde_k);
        holonomy.push(e.holonomy);
        rhs_tilde.push(dt);
        rhs_hat.push(dh);
    }
    let lhs_tilde = centred_derivative(&r, &etilde, 2);
    let lhs_hat = centred_derivative(&r, &ehat, 2);
    let defect = |lhs: &[f64], rhs: &[f64]| -> Vec<f64> { lhs.iter().zip(rhs).map(|(l, r)| l - r).collect() };
    let d_tilde = defect(&lhs_tilde, &rhs_tilde[2..m - 2]);
    let d_hat = defect(&lhs_hat, &rhs_hat[2..m - 2]);
    let rel = |d: &[f64], rhs: &[f64]| {
        let scale = rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let worst = d.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    };
    let res_tilde = rel(&d_tilde, &rhs_tilde[2..m - 2]);
    let res_hat = rel(&d_hat, &rhs_hat[2..m - 2]);
    let violation = etilde
        .windows(2)
        .map(|w| (w[0] - w[1]) / (1.0 + w[1].abs()))
        .fold(0.0f64, f64::max);
    let ok = res_tilde < tol && res_hat < tol && violation <= 1e-9;
    Ok(Certificate::new("tsym-monotonicity", Verdict::from_bool(ok))
        .with_metric("etilde_residual", res_tilde)
        .with_metric("ehat_residual", res_hat)
        .with_metric("etilde_monotonicity_violation", violation)
        .with_tolerance(tol)
        .with_samples("R", r.clone())
        .with_samples("ehat_k", ehat)
        .with_samples("etilde_k", etilde)
        .with_samples("holonomy", holonomy)
        .with_samples("R_interior", r[2..m - 2].to_vec())
        .with_samples("etilde_defect", d_tilde)
        .with_samples("ehat_defect", d_hat))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::circle::CircleGrid;
    use crate::tsym::{TsymFields, TsymRates};

    #[test]
    fn flat_fields_give_pure_twist_energy() {
        let grid = CircleGrid::periodic(16).unwrap();
        let (r, k) = (0.5, 3.0);
        let st = TsymState::new(grid, r, k, TsymFields::flat(16), Some(TsymRates::zero(16))).unwrap();
        let e = energies_k(&st).unwrap();
        let expected = 2.0 * PI * 0.25 * k * k / r.powi(4);
        assert!((e.ehat_k - expected).abs() < 1e-12 * expected);
        assert!((e.etilde_k - 0.5 * PI * k * k / (r * r)).abs() < 1e-12 * e.etilde_k);
        assert_eq!(e.d_integral, 0.0);
        assert_eq!(e.holonomy, 0.0);
    }

    #[test]
    fn holonomy_enters_only_the_rescaled_energy() {
        let grid = CircleGrid::periodic(16).unwrap();
        let mut f = TsymFields::flat(16);
        f.h_conn = grid.sample(|t| 1.5 + t.sin());
        let st = TsymState::new(grid, 0.7, 2.0, f, Some(TsymRates::zero(16))).unwrap();
        let e = energies_k(&st).unwrap();
        assert!((e.holonomy - 3.0 * PI).abs() < 1e-12);
        assert!((e.etilde_k - 0.49 * e.ehat_k - 0.5 * 2.0 * e.holonomy).abs() < 1e-12);
    }

    #[test]
    fn energies_need_rates() {
        let grid = CircleGrid::periodic(8).unwrap();
        let st = TsymState::new(grid, 1.0, 1.0, TsymFields::flat(8), None).unwrap();
        assert!(matches!(energies_k(&st), Err(Error::MissingField(_))));
    }
}
