use nalgebra::{DMatrix, SymmetricEigen};

use super::MatrixFlow;
use crate::symmat::{sym_power, symmetrize};
use crate::{Certificate, Error, Result, Verdict};

type Split = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64);

/// Kasner data recovered from a flat history.
#[derive(Debug, Clone)]
pub struct KasnerReconstruction {
    /// `M = h⁻¹K/H` at the first sample.
    pub m: DMatrix<f64>,
    /// `ĥ = h(−H)^{2M}` at the first sample.
    pub h_hat: DMatrix<f64>,
    pub m_samples: Vec<DMatrix<f64>>,
    pub certificate: Certificate,
}

fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = eig.eigenvalues.map(f);
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// `h^{1/2}`, `h^{−1/2}` and the symmetric `h^{−1/2}Kh^{−1/2}/H`, which is
/// similar to `M`.
fn split(f: &MatrixFlow) -> Result<Split> {
    let hm = f.mean_curvature();
    if !(hm < 0.0) {
        return Err(Error::InvalidInput(format!("mean curvature must be negative, got {hm} at t = {}", f.t)));
    }
    let root = sym_power(&f.h, 0.5);
    let inv_root = sym_power(&f.h, -0.5);
    let mt = symmetrize(&(&inv_root * &f.k * &inv_root / hm));
    Ok((root, inv_root, mt, hm))
}

/// Recovers `M = h⁻¹K/H` and `ĥ = h(−H)^{2M}` at every time and reports how
/// far they are from constant, `TrM − 1`, `TrM² − 1`, and the relative error
/// of `h(t) = ĥ(−H)^{−2M}` predicted from the first sample. Matrix powers go
/// through `(−H)^{2M} = h^{−1/2}exp(2ln(−H)M̃)h^{1/2}` with `M̃` symmetric.
pub fn kasner_reconstruct(history: &[MatrixFlow], tol: f64) -> Result<KasnerReconstruction> {
    if history.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: history.len() });
    }
    let n = history[0].dim();
    if history.iter().any(|f| f.dim() != n) {
        return Err(Error::Shape("history mixes dimensions".into()));
    }
    let mut m_samples = Vec::with_capacity(history.len());
    let mut h_hats = Vec::with_capacity(history.len());
    let mut tr_err = 0.0f64;
    let mut tr2_err = 0.0f64;
    let mut parts = Vec::with_capacity(history.len());
    for f in history {
        let (root, inv_root, mt, hm) = split(f)?;
        let m = &inv_root * &mt * &root;
        tr_err = tr_err.max((m.trace() - 1.0).abs());
        tr2_err = tr2_err.max(((&m * &m).trace() - 1.0).abs());
        let ell = (-hm).ln();
        h_hats.push(symmetrize(&(&root * sym_apply(&mt, |x| (2.0 * ell * x).exp()) * &root)));
        m_samples.push(m);
        parts.push((root, inv_root, mt));
    }
    let m0 = m_samples[0].clone();
    let scale = m0.norm().max(1.0);
    let m_variation = m_samples.iter().map(|m| (m - &m0).norm() / scale).fold(0.0, f64::max);
    let hh0 = &h_hats[0];
    let h_hat_variation = h_hats.iter().map(|h| (h - hh0).norm() / hh0.norm()).fold(0.0, f64::max);
    let (root0, inv_root0, mt0) = &parts[0];
    let h_residual = history
        .iter()
        .map(|f| {
            let ell = (-f.mean_curvature()).ln();
            let power = inv_root0 * sym_apply(mt0, |x| (-2.0 * ell * x).exp()) * root0;
            (hh0 * power - &f.h).norm() / f.h.norm()
        })
        .fold(0.0, f64::max);
    let ok = m_variation <= tol && tr_err <= tol && tr2_err <= tol;
    let certificate = Certificate::new("cmc-kasner-reconstruct", Verdict::from_bool(ok))
        .with_tolerance(tol)
        .with_metric("m_variation", m_variation)
        .with_metric("h_hat_variation", h_hat_variation)
        .with_metric("trace_error", tr_err)
        .with_metric("trace_square_error", tr2_err)
        .with_metric("h_residual", h_residual)
        .with_samples("t", history.iter().map(|f| f.t).collect())
        .with_samples("trace_m", m_samples.iter().map(|m| m.trace()).collect())
        .with_samples("trace_m2", m_samples.iter().map(|m| (m * m).trace()).collect());
    Ok(KasnerReconstruction { m: m0, h_hat: hh0.clone(), m_samples, certificate })
}
