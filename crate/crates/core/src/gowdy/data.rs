use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GowdyState;
use crate::circle::CircleGrid;
use crate::symmat::{expm, sym_power, symmetrize};
use crate::{Error, Result};

/// `N = 2` data from the coordinates `(P, Q)` of the normalized metric and
/// their `s`-derivatives, at time `s0`.
pub fn init_from_pq(p: &[f64], q: &[f64], p_s: &[f64], q_s: &[f64], s0: f64, grid: &CircleGrid) -> Result<GowdyState> {
    let n = grid.len();
    if [p.len(), q.len(), p_s.len(), q_s.len()].iter().any(|&l| l != n) {
        return Err(Error::Shape(format!("P, Q and their rates must have {n} samples")));
    }
    let t = (-s0).exp();
    let mut g = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    for i in 0..n {
        let (ep, em) = (p[i].exp(), (-p[i]).exp());
        let qq = q[i];
        let ghat = DMatrix::from_row_slice(2, 2, &[ep, ep * qq, ep * qq, ep * qq * qq + em]);
        let d00 = ep * p_s[i];
        let d01 = ep * (p_s[i] * qq + q_s[i]);
        let d11 = ep * (p_s[i] * qq * qq + 2.0 * qq * q_s[i]) - em * p_s[i];
        let ghat_s = DMatrix::from_row_slice(2, 2, &[d00, d01, d01, d11]);
        let ghat_inv = DMatrix::from_row_slice(2, 2, &[ep * qq * qq + em, -ep * qq, -ep * qq, ep]);
        a.push(ghat_inv * ghat_s - DMatrix::identity(2, 2));
        g.push(ghat * t);
    }
    GowdyState::new(grid.clone(), s0, g, a)
}

/// Inverse of the parametrization in [`init_from_pq`].
pub fn extract_pq(state: &GowdyState) -> Result<(Vec<f64>, Vec<f64>)> {
    if state.dim() != 2 {
        return Err(Error::InvalidInput(format!("(P, Q) coordinates need N = 2, got {}", state.dim())));
    }
    let t = state.t();
    Ok(state
        .g()
        .iter()
        .map(|g| {
            let g00 = g[(0, 0)] / t;
            (g00.ln(), g[(0, 1)] / (t * g00))
        })
        .unzip())
}

/// Spatially homogeneous data `G = diag(T^{2q_i})` conjugated by the
/// rotation `rot`, with `Σq_i = 1`.
pub fn homogeneous_state(grid: &CircleGrid, q: &[f64], rot: &DMatrix<f64>, s0: f64) -> Result<GowdyState> {
    let sum: f64 = q.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("exponents must sum to 1, got {sum}")));
    }
    let t = (-s0).exp();
    let d = DMatrix::from_diagonal(&DVector::from_iterator(q.len(), q.iter().map(|q| t.powf(2.0 * q))));
    let w = DMatrix::from_diagonal(&DVector::from_iterator(q.len(), q.iter().map(|q| -2.0 * q)));
    let g = symmetrize(&(rot * d * rot.transpose()));
    let a = rot * w * rot.transpose();
    GowdyState::new(grid.clone(), s0, vec![g; grid.len()], vec![a; grid.len()])
}

/// Bessel function of the first kind of integer order, from the periodic
/// integral `J_n(x) = (1/2π)∮cos(nθ − x sin θ)dθ` with the trapezoid rule.
pub fn bessel_j(order: i32, x: f64) -> f64 {
    let m = 64 + 2 * (x.abs().ceil() as usize);
    let h = 2.0 * PI / m as f64;
    let sum: f64 = (0..m)
        .map(|i| {
            let th = i as f64 * h;
            (order as f64 * th - x * th.sin()).cos()
        })
        .sum();
    sum / m as f64
}

/// Polarized `N = 2` solution `P = a·J₀(kT)cos(ky)`, `Q = 0`, with
/// `k = 2πm/L_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizedBessel {
    pub mode: u32,
    pub amplitude: f64,
}

impl PolarizedBessel {
    pub fn wavenumber(&self, grid: &CircleGrid) -> f64 {
        2.0 * PI * self.mode as f64 / grid.length()
    }

    pub fn p(&self, grid: &CircleGrid, s: f64, y: f64) -> f64 {
        let k = self.wavenumber(grid);
        self.amplitude * bessel_j(0, k * (-s).exp()) * (k * y).cos()
    }

    /// `∂_s P = −T∂_T P = a·kT·J₁(kT)cos(ky)`.
    pub fn p_s(&self, grid: &CircleGrid, s: f64, y: f64) -> f64 {
        let k = self.wavenumber(grid);
        let kt = k * (-s).exp();
        self.amplitude * kt * bessel_j(1, kt) * (k * y).cos()
    }

    pub fn state(&self, grid: &CircleGrid, s0: f64) -> Result<GowdyState> {
        let p = grid.sample(|y| self.p(grid, s0, y));
        let ps = grid.sample(|y| self.p_s(grid, s0, y));
        let zero = vec![0.0; grid.len()];
        init_from_pq(&p, &zero, &ps, &zero, s0, grid)
    }

    /// Largest deviation of the state's `P` from the exact solution.
    pub fn max_error(&self, state: &GowdyState) -> Result<f64> {
        let (p, q) = extract_pq(state)?;
        let grid = state.grid();
        Ok(grid
            .coords()
            .iter()
            .zip(p.iter().zip(&q))
            .map(|(y, (p, q))| (p - self.p(grid, state.s(), *y)).abs().max(q.abs()))
            .fold(0.0, f64::max))
    }
}

/// Parameters of random band-limited initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomData {
    pub dim: usize,
    /// Scale of the traceless metric logarithm.
    pub amplitude: f64,
    /// Scale of the traceless velocity.
    pub velocity_amplitude: f64,
    /// Highest Fourier mode present.
    pub band: u32,
    /// Restrict to diagonal (polarized) data.
    pub polarized: bool,
}

impl Default for RandomData {
    fn default() -> Self {
        Self { dim: 2, amplitude: 0.3, velocity_amplitude: 0.3, band: 3, polarized: false }
    }
}

/// Band-limited symmetric traceless matrix field; mode `k` carries
/// coefficients of size `amplitude/(1+k)`.
fn random_traceless(rng: &mut ChaCha8Rng, grid: &CircleGrid, p: &RandomData, amplitude: f64) -> Vec<DMatrix<f64>> {
    let n = p.dim;
    let mut out = vec![DMatrix::zeros(n, n); grid.len()];
    let coords = grid.coords();
    for k in 0..=p.band {
        let wk = 2.0 * PI * k as f64 / grid.length();
        let scale = amplitude / (1.0 + k as f64);
        for part in 0..2 {
            if k == 0 && part == 1 {
                continue;
            }
            let mut c = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    if p.polarized && i != j {
                        continue;
                    }
                    let v = scale * rng.random_range(-1.0..1.0);
                    c[(i, j)] = v;
                    c[(j, i)] = v;
                }
            }
            let tr = c.trace() / n as f64;
            for i in 0..n {
                c[(i, i)] -= tr;
            }
            for (o, y) in out.iter_mut().zip(&coords) {
                let f = if part == 0 { (wk * y).cos() } else { (wk * y).sin() };
                *o += &c * f;
            }
        }
    }
    out
}

/// Reproducible random data at `s0`: `G = T₀^{2/N}exp(X)` and
/// `Ã = −(2/N)I + G^{−1/2}YG^{1/2}` with `X`, `Y` band-limited, symmetric and
/// traceless. The generator is keyed by `seed` only.
pub fn random_state(grid: &CircleGrid, params: &RandomData, seed: u64, s0: f64) -> Result<GowdyState> {
    if params.dim < 1 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.dim;
    let x = random_traceless(&mut rng, grid, params, params.amplitude);
    let y = random_traceless(&mut rng, grid, params, params.velocity_amplitude);
    let scale = (-s0 * 2.0 / n as f64).exp();
    let mut g = Vec::with_capacity(grid.len());
    let mut a = Vec::with_capacity(grid.len());
    for (x, y) in x.iter().zip(&y) {
        let gm = symmetrize(&(expm(x) * scale));
        let half = sym_power(&gm, 0.5);
        let inv_half = sym_power(&gm, -0.5);
        a.push(&inv_half * y * &half - DMatrix::identity(n, n) * (2.0 / n as f64));
        g.push(gm);
    }
    GowdyState::new(grid.clone(), s0, g, a)
}
