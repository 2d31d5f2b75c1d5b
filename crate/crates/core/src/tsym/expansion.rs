use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{TsymFields, TsymHistory, TsymRates, TsymState};
use crate::circle::CircleGrid;
use crate::{Error, Result};

/// Trigonometric polynomial on a circle of circumference `L`:
/// `mean + Σ_j cos[j]·cos(jωθ) + sin[j]·sin(jωθ)` with `ω = 2π/L` and `j`
/// starting at 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trig {
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl Trig {
    pub fn constant(c: f64) -> Self {
        Self { mean: c, ..Default::default() }
    }

    pub fn cosine(mean: f64, amplitude: f64) -> Self {
        Self { mean, cos: vec![amplitude], sin: Vec::new() }
    }

    pub fn is_constant(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|c| *c == 0.0)
    }

    pub fn eval(&self, theta: f64, length: f64) -> f64 {
        let w = 2.0 * PI / length;
        let c: f64 = self.cos.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * w * theta).cos()).sum();
        let s: f64 = self.sin.iter().enumerate().map(|(j, s)| s * ((j + 1) as f64 * w * theta).sin()).sum();
        self.mean + c + s
    }

    pub fn derivative(&self, theta: f64, length: f64) -> f64 {
        let w = 2.0 * PI / length;
        let c: f64 =
            self.cos.iter().enumerate().map(|(j, c)| -c * (j + 1) as f64 * w * ((j + 1) as f64 * w * theta).sin()).sum();
        let s: f64 =
            self.sin.iter().enumerate().map(|(j, s)| s * (j + 1) as f64 * w * ((j + 1) as f64 * w * theta).cos()).sum();
        c + s
    }

    pub fn sample(&self, grid: &CircleGrid) -> Vec<f64> {
        grid.sample(|t| self.eval(t, grid.length()))
    }
}

/// Free functions of the formal large-`τ` expansion
/// `U ~ −(1−k)τ/2 + U_★★`, `A ~ A_★ + A_★★e^{−2kτ}`, `a ~ a_★`, `H ~ H_★`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionProfile {
    pub k: Trig,
    #[serde(rename = "U_ss")]
    pub u_ss: Trig,
    #[serde(rename = "A_star")]
    pub big_a_star: Trig,
    #[serde(rename = "A_ss")]
    pub big_a_ss: Trig,
    pub a_star: Trig,
    #[serde(rename = "H_star")]
    pub h_star: Trig,
    /// Accept `k` outside `(0, 1)`, where the expansion is not claimed.
    #[serde(default)]
    pub allow_k_outside_unit: bool,
}

impl ExpansionProfile {
    /// Profile with constant `A_★` (the half-polarized case).
    pub fn half_polarized(k: Trig, big_a_ss: Trig) -> Self {
        Self {
            k,
            u_ss: Trig::constant(0.0),
            big_a_star: Trig::constant(0.0),
            big_a_ss,
            a_star: Trig::constant(1.0),
            h_star: Trig::constant(0.0),
            allow_k_outside_unit: false,
        }
    }

    pub fn is_half_polarized(&self) -> bool {
        self.big_a_star.is_constant()
    }

    /// Checks `0 < k < 1` and `a_★ > 0` on the grid. Returns warnings for
    /// out-of-range `k` when the override is set.
    pub fn validate(&self, grid: &CircleGrid) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let k = self.k.sample(grid);
        let (lo, hi) = k.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        if !(lo > 0.0 && hi < 1.0) {
            let msg = format!("k ranges over [{lo}, {hi}], outside (0, 1)");
            if self.allow_k_outside_unit {
                warnings.push(msg);
            } else {
                return Err(Error::InvalidInput(msg));
            }
        }
        if let Some(v) = self.a_star.sample(grid).iter().find(|v| !(**v > 0.0)) {
            return Err(Error::InvalidInput(format!("a_star must be positive, found {v}")));
        }
        Ok(warnings)
    }

    /// Mean of `k` over the circle.
    pub fn mean_k(&self) -> f64 {
        self.k.mean
    }
}

/// The truncated expansion evaluated at time `τ ≥ 1`, with
/// `R`-derivatives from term-by-term differentiation. `η` is set to zero and
/// marked as defaulted, and `G = 0`.
pub fn expansion_fields(profile: &ExpansionProfile, tau: f64, grid: &CircleGrid, twist: f64) -> Result<TsymState> {
    if !(tau >= 1.0) {
        return Err(Error::InvalidInput(format!("expansion is evaluated for τ ≥ 1, got {tau}")));
    }
    profile.validate(grid)?;
    let n = grid.len();
    let k = profile.k.sample(grid);
    let uss = profile.u_ss.sample(grid);
    let astar = profile.big_a_star.sample(grid);
    let ass = profile.big_a_ss.sample(grid);
    let r = (-tau).exp();
    let mut fields = TsymFields::flat(n);
    let mut rates = TsymRates::zero(n);
    for i in 0..n {
        let decay = (-2.0 * k[i] * tau).exp();
        fields.u[i] = -(1.0 - k[i]) * tau / 2.0 + uss[i];
        fields.big_a[i] = astar[i] + ass[i] * decay;
        // d/dR = −e^{τ} d/dτ
        rates.u[i] = -(1.0 - k[i]) / 2.0 * -tau.exp();
        rates.big_a[i] = -2.0 * k[i] * ass[i] * decay * -tau.exp();
    }
    fields.a = profile.a_star.sample(grid);
    fields.h_conn = profile.h_star.sample(grid);
    Ok(TsymState::new(grid.clone(), r, twist, fields, Some(rates))?.with_defaulted_eta())
}

/// Expansion states at the given times.
pub fn expansion_history(profile: &ExpansionProfile, taus: &[f64], grid: &CircleGrid, twist: f64) -> Result<TsymHistory> {
    let states = taus.iter().map(|&t| expansion_fields(profile, t, grid, twist)).collect::<Result<Vec<_>>>()?;
    TsymHistory::new(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_gives_pure_exponential() {
        let grid = CircleGrid::periodic(16).unwrap();
        let p = ExpansionProfile::half_polarized(Trig::constant(0.5), Trig::constant(1.0));
        for tau in [1.0, 2.5, 4.0] {
            let st = expansion_fields(&p, tau, &grid, 1.0).unwrap();
            let f = st.fields();
            assert!(f.big_a.iter().all(|a| (a - (-tau).exp()).abs() < 1e-15));
            // U_τ = −R·U_R = −(1−k)/2
            assert!(st.rates().unwrap().u.iter().all(|u| (-st.r() * u + 0.25).abs() < 1e-15));
            assert!(!st.eta_supplied());
        }
    }

    #[test]
    fn k_range_is_enforced_unless_overridden() {
        let grid = CircleGrid::periodic(16).unwrap();
        let mut p = ExpansionProfile::half_polarized(Trig::cosine(0.8, 0.3), Trig::constant(1.0));
        assert!(expansion_fields(&p, 2.0, &grid, 1.0).is_err());
        p.allow_k_outside_unit = true;
        assert_eq!(p.validate(&grid).unwrap().len(), 1);
        assert!(expansion_fields(&p, 2.0, &grid, 1.0).is_ok());
        assert!(expansion_fields(&p, 0.5, &grid, 1.0).is_err());
    }

    #[test]
    fn trig_derivative_matches_spectral() {
        let grid = CircleGrid::new(32, 3.0, crate::circle::Scheme::Spectral).unwrap();
        let f = Trig { mean: 0.2, cos: vec![0.5, 0.0, -0.1], sin: vec![0.0, 0.3] };
        let d = grid.derivative(&f.sample(&grid)).unwrap();
        for (x, d) in grid.coords().iter().zip(&d) {
            assert!((f.derivative(*x, 3.0) - d).abs() < 1e-12);
        }
    }
}
