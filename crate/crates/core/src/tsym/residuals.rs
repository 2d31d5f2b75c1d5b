use super::{TsymHistory, TsymState};
use crate::quad::fornberg_weights;
use crate::{Error, Result};

/// Pointwise residuals at one history entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldResiduals {
    pub r: f64,
    /// `H_R − KR⁻³a⁻¹e^{2η}`; `None` when `η` was not supplied.
    pub twist: Option<Vec<f64>>,
    /// `(Ra⁻¹U_R)_R − (RaU_θ)_θ − ½R⁻¹e^{4U}(a⁻¹A_R² − aA_θ²)`.
    pub uwave: Vec<f64>,
}

impl FieldResiduals {
    pub fn twist_sup(&self) -> Option<f64> {
        self.twist.as_ref().map(|t| sup(t))
    }

    pub fn uwave_sup(&self) -> f64 {
        sup(&self.uwave)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// `H_R − KR⁻³a⁻¹e^{2η}` at one state.
pub fn twist_residual(state: &TsymState) -> Result<Vec<f64>> {
    if !state.eta_supplied() {
        return Err(Error::MissingField("eta (the state carries a defaulted η)"));
    }
    let rates = state.rates()?;
    let f = state.fields();
    let (r, k) = (state.r(), state.twist());
    Ok((0..f.a.len())
        .map(|i| rates.h_conn[i] - k / r.powi(3) / f.a[i] * (2.0 * f.eta[i]).exp())
        .collect())
}

/// Residuals at history entry `index`, which needs a neighbour on each side:
/// the outer `R`-derivative of `Ra⁻¹U_R` is a three-point centred difference
/// on the supplied (possibly nonuniform) times.
pub fn field_residuals(history: &TsymHistory, index: usize) -> Result<FieldResiduals> {
    if history.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: history.len() });
    }
    if index == 0 || index + 1 >= history.len() {
        return Err(Error::InvalidInput(format!(
            "index {index} has no neighbour on both sides in a history of {}",
            history.len()
        )));
    }
    let window = &history.states()[index - 1..=index + 1];
    let rs: Vec<f64> = window.iter().map(TsymState::r).collect();
    let w = fornberg_weights(rs[1], &rs, 1);
    let flux = |st: &TsymState| -> Result<Vec<f64>> {
        let rates = st.rates()?;
        Ok(st.fields().a.iter().zip(&rates.u).map(|(a, u)| st.r() / a * u).collect())
    };
    let fluxes = window.iter().map(flux).collect::<Result<Vec<_>>>()?;

    let st = &window[1];
    let grid = st.grid();
    let f = st.fields();
    let rates = st.rates()?;
    let r = st.r();
    let ut = st.u_theta()?;
    let at = st.big_a_theta()?;
    let spatial: Vec<f64> = f.a.iter().zip(&ut).map(|(a, u)| r * a * u).collect();
    let spatial_t = grid.derivative(&spatial)?;
    let uwave = (0..grid.len())
        .map(|i| {
            let dr = w[0] * fluxes[0][i] + w[1] * fluxes[1][i] + w[2] * fluxes[2][i];
            let a = f.a[i];
            let source = 0.5 / r * (4.0 * f.u[i]).exp() * (rates.big_a[i].powi(2) / a - a * at[i].powi(2));
            dr - spatial_t[i] - source
        })
        .collect();
    let twist = if st.eta_supplied() { Some(twist_residual(st)?) } else { None };
    Ok(FieldResiduals { r, twist, uwave })
}
