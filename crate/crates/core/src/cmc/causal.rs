use std::cell::RefCell;

use serde::Serialize;

use super::FlowSource;
use crate::quad::GaussLegendre;
use crate::{Error, Result};

/// An integrand `~ t^q` in `ln t` with `q` at or below this is treated as
/// divergent at `t → 0`.
pub const DIVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CausalRadius {
    /// `∫ L/aᵢ ds`, infinite when it diverges at `t_low = 0`.
    pub radius: f64,
    /// Exponent `q` of the integrand `~ s^q` in `ln s` near `s = 0`, when
    /// `t_low = 0`. Divergence means `q ≤ 0`; `q = 0` is logarithmic.
    pub exponent: Option<f64>,
    /// `∫ ds/f(s)` with `f(s) = minⱼ aⱼ(s)/aⱼ(t_high)`, the diameter bound
    /// in the metric at `t_high` (it uses `L ≤ 1`).
    pub diameter_bound: f64,
}

/// Adaptive composite Gauss–Legendre in `σ = ln s` over `[ln a, ln b]`.
fn log_integral(g: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let gl = GaussLegendre::new(8);
    let err = RefCell::new(None);
    let eval = |panels: usize| {
        gl.integrate(a.ln(), b.ln(), panels, |s| {
            g(s.exp()).unwrap_or_else(|e| {
                *err.borrow_mut() = Some(e);
                f64::NAN
            })
        })
    };
    let mut panels = 4;
    let mut prev = eval(panels);
    loop {
        panels *= 2;
        let next = eval(panels);
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        if (next - prev).abs() <= 1e-15 * next.abs() || panels >= 1 << 14 {
            return Ok(next);
        }
        prev = next;
    }
}

/// `∫_{t_low}^{t_high} g(s)ds/s`; at `t_low = 0` the integrand's power law
/// near zero decides convergence and supplies the tail below `10⁻¹⁰t_high`.
fn radial(g: &dyn Fn(f64) -> Result<f64>, t_low: f64, t_high: f64) -> Result<(f64, Option<f64>)> {
    if t_low > 0.0 {
        return Ok((log_integral(g, t_low, t_high)?, None));
    }
    let (ta, tb) = (1e-10 * t_high, 1e-9 * t_high);
    let q = (g(tb)? / g(ta)?).ln() / 10f64.ln();
    if q <= DIVERGENCE_TOL {
        return Ok((f64::INFINITY, Some(q)));
    }
    Ok((log_integral(g, ta, t_high)? + g(ta)? / q, Some(q)))
}

/// Coordinate radius of the causal past of a point at `t_high`, measured in
/// the fixed metric of `block` back to `t_low` (which may be 0).
pub fn causal_radius(source: &impl FlowSource, block: usize, t_low: f64, t_high: f64) -> Result<CausalRadius> {
    if !(t_low >= 0.0 && t_low < t_high) {
        return Err(Error::InvalidInput(format!("need 0 ≤ t_low < t_high, got [{t_low}, {t_high}]")));
    }
    let top = source.flow_at(t_high)?;
    if block >= top.blocks.len() {
        return Err(Error::InvalidInput(format!("block {block} out of range")));
    }
    let scales: Vec<f64> = top.blocks.iter().map(|b| b.scale).collect();
    let g = |s: f64| -> Result<f64> {
        let f = source.flow_at(s)?;
        Ok(f.lapse() * s / f.blocks[block].scale)
    };
    let bound = |s: f64| -> Result<f64> {
        let f = source.flow_at(s)?;
        let ratio = f.blocks.iter().zip(&scales).map(|(b, a0)| b.scale / a0).fold(f64::INFINITY, f64::min);
        Ok(s / ratio)
    };
    let (radius, exponent) = radial(&g, t_low, t_high)?;
    let (diameter_bound, _) = radial(&bound, t_low, t_high)?;
    Ok(CausalRadius { radius, exponent, diameter_bound })
}

/// Whether two points `separation` apart in the fixed metric of `block`
/// have disjoint causal pasts on `[t/Λ, t]`: `2·r(t/Λ, t) < separation`.
pub fn disjointness(source: &impl FlowSource, block: usize, separation: f64, lambda: f64, t: f64) -> Result<bool> {
    if !(lambda > 1.0) {
        return Err(Error::InvalidInput(format!("Λ must exceed 1, got {lambda}")));
    }
    Ok(2.0 * causal_radius(source, block, t / lambda, t)?.radius < separation)
}
