use serde::Serialize;

use super::FlowSource;
use crate::{Error, Result};

/// Relative step of the time differences, `δ = CURVATURE_STEP·t`.
pub const CURVATURE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub t: Vec<f64>,
    /// `t²|Rm|_T` at each `t`.
    pub scaled_norm: Vec<f64>,
    /// Supremum of `scaled_norm`.
    pub type_i_constant: f64,
}

/// `t²|Rm|_T` for `g = −L²dt² + Σ aᵢ²ĥᵢ` with space-form blocks.
///
/// In an orthonormal frame the curvature operator is diagonal on the
/// bivectors `eₐ∧e_b`, with sectional curvatures `ä/a` (time and block `i`),
/// `(εᵢ + ȧᵢ²)/aᵢ²` (two directions in block `i`) and `ȧᵢȧⱼ/(aᵢaⱼ)` (blocks
/// `i ≠ j`), dots being proper-time derivatives. Each diagonal entry appears
/// four times in `Σ R²_{αβγδ}`. `ȧ = −κa` comes from the flow; `ä` is a
/// fourth-order central difference of it in `t`, divided by `L`.
pub fn curvature_report(source: &impl FlowSource, ts: &[f64]) -> Result<CurvatureReport> {
    let (lo, hi) = source.domain();
    let mut scaled_norm = Vec::with_capacity(ts.len());
    for &t in ts {
        let d = CURVATURE_STEP * t;
        if !(t - 2.0 * d > lo.max(0.0)) || !(t + 2.0 * d <= hi) || !(t > 1e-150) {
            return Err(Error::InvalidInput(format!("t = {t} too close to the edge of [{lo}, {hi}] for time differences")));
        }
        let f = source.flow_at(t)?;
        let around = [t - 2.0 * d, t - d, t + d, t + 2.0 * d]
            .into_iter()
            .map(|s| source.flow_at(s))
            .collect::<Result<Vec<_>>>()?;
        let l = f.lapse();
        let mut sum = 0.0;
        let adot: Vec<f64> = f.blocks.iter().map(|b| -b.kappa * b.scale).collect();
        for (i, b) in f.blocks.iter().enumerate() {
            let v: Vec<f64> = around.iter().map(|g| -g.blocks[i].kappa * g.blocks[i].scale).collect();
            let addot = (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * d) / l;
            let n = b.dim as f64;
            sum += n * (addot / b.scale).powi(2);
            let spatial = (f64::from(b.epsilon) + adot[i] * adot[i]) / (b.scale * b.scale);
            sum += 0.5 * n * (n - 1.0) * spatial * spatial;
            for (j, c) in f.blocks.iter().enumerate().skip(i + 1) {
                sum += n * c.dim as f64 * (adot[i] * adot[j] / (b.scale * c.scale)).powi(2);
            }
        }
        scaled_norm.push(t * t * (4.0 * sum).sqrt());
    }
    let type_i_constant = scaled_norm.iter().cloned().fold(0.0, f64::max);
    Ok(CurvatureReport { t: ts.to_vec(), scaled_norm, type_i_constant })
}
