use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{CircleGrid, DensityField};
use crate::symmat::{field_derivative, sym_power, symmetrize, SelfAdjointSection};
use crate::{Error, Result};

/// Relative residual at which the conjugate-gradient solve stops.
pub const CG_TOLERANCE: f64 = 1e-12;
const CG_MAX_ITER: usize = 5000;

/// Result of a dual-norm evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HminusNorm {
    pub value: f64,
    /// `L²(μ)` norm of the same input, an upper bound for `value`.
    pub l2: f64,
    /// `L²(μ)` norm of the component along the identity section, which lies
    /// in the kernel of the covariant derivative.
    pub kernel_component: f64,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for an SPD operator.
fn pcg<A, P>(apply: A, precond: P, rhs: &[f64]) -> Result<(Vec<f64>, usize, f64)>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let bnorm = dot(rhs, rhs).sqrt();
    let mut x = vec![0.0; rhs.len()];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut r = rhs.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=CG_MAX_ITER {
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel < CG_TOLERANCE {
            // confirm against the true residual to guard against drift
            let ax = apply(&x);
            let true_rel = rhs.iter().zip(&ax).map(|(b, a)| (b - a) * (b - a)).sum::<f64>().sqrt() / bnorm;
            if true_rel < 10.0 * CG_TOLERANCE {
                return Ok((x, it, true_rel));
            }
            r = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            z = precond(&r);
            p = z.clone();
            rz = dot(&r, &z);
            continue;
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = dot(&r, &r).sqrt() / bnorm;
    Err(Error::SolverDiverged { iterations: CG_MAX_ITER, residual: rel })
}

/// Per-point geometric data of the operator.
struct Frame {
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    connection: DMatrix<f64>,
}

struct MatrixOperator<'a> {
    grid: &'a CircleGrid,
    frames: Vec<Frame>,
    weights: &'a [f64],
    dim: usize,
}

impl MatrixOperator<'_> {
    fn unpack(&self, v: &[f64]) -> Vec<DMatrix<f64>> {
        let nn = self.dim * self.dim;
        v.chunks(nn).map(|c| DMatrix::from_row_slice(self.dim, self.dim, c)).collect()
    }

    fn pack(&self, m: &[DMatrix<f64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(m.len() * self.dim * self.dim);
        for x in m {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    out.push(x[(i, j)]);
                }
            }
        }
        out
    }

    /// `X ↦ sym(G^{1/2}·D_y(G^{-1/2}XG^{1/2})·G^{-1/2})`.
    fn gradient(&self, x: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let sec: Vec<DMatrix<f64>> = x.iter().zip(&self.frames).map(|(x, f)| &f.inv_sqrt * x * &f.sqrt).collect();
        let d = field_derivative(self.grid, &sec).expect("grid and field sizes agree");
        d.into_par_iter()
            .zip(sec.par_iter())
            .zip(self.frames.par_iter())
            .map(|((d, s), f)| {
                let cov = d + (&f.connection * s - s * &f.connection) * 0.5;
                symmetrize(&(&f.sqrt * cov * &f.inv_sqrt))
            })
            .collect()
    }

    /// Adjoint of [`Self::gradient`] under the Frobenius pairing summed over
    /// grid points.
    fn gradient_adjoint(&self, z: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let lifted: Vec<DMatrix<f64>> = z.iter().zip(&self.frames).map(|(z, f)| &f.sqrt * z * &f.inv_sqrt).collect();
        let d = field_derivative(self.grid, &lifted).expect("grid and field sizes agree");
        d.into_par_iter()
            .zip(lifted.par_iter())
            .zip(self.frames.par_iter())
            .map(|((d, w), f)| {
                let bt = f.connection.transpose();
                let v = -d + (&bt * w - w * &bt) * 0.5;
                symmetrize(&(&f.inv_sqrt * v * &f.sqrt))
            })
            .collect()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let h = self.grid.spacing();
        let x = self.unpack(v);
        let lx = self.gradient(&x);
        let scaled: Vec<DMatrix<f64>> = lx.iter().zip(self.weights).map(|(m, w)| m / *w).collect();
        let back = self.gradient_adjoint(&scaled);
        let out: Vec<DMatrix<f64>> =
            x.iter().zip(&back).zip(self.weights).map(|((x, b), w)| (x * *w + b) * h).collect();
        self.pack(&out)
    }
}

/// Fourier preconditioner `1/(Δy(w̄ + λ_k²/w̄))` applied entry line by line.
fn fourier_preconditioner(grid: &CircleGrid, mean_weight: f64, stride: usize, v: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let h = grid.spacing();
    let mut out = vec![0.0; v.len()];
    let mut line = vec![0.0; n];
    for c in 0..stride {
        for (p, l) in line.iter_mut().enumerate() {
            *l = v[p * stride + c];
        }
        let y = grid.fourier_multiply(&line, |k| {
            let lam = grid.derivative_symbol(k);
            1.0 / (h * (mean_weight + lam * lam / mean_weight))
        });
        for (p, val) in y.into_iter().enumerate() {
            out[p * stride + c] = val;
        }
    }
    out
}

/// Dual norm of a self-adjoint section against the `H¹`-type form
/// `∮Tr(σ̂²)dμ + ∮Tr((D_yσ̂)²)dy²/μ` over self-adjoint test sections.
pub fn hminus_norm_matrix(eta: &SelfAdjointSection, mu: &DensityField, grid: &CircleGrid) -> Result<HminusNorm> {
    let metric = eta.metric();
    if metric.len() != grid.len() || mu.len() != grid.len() {
        return Err(Error::Shape(format!(
            "section has {} points, density {}, grid {}",
            metric.len(),
            mu.len(),
            grid.len()
        )));
    }
    let dim = metric.dim();
    let connection = metric.connection(grid)?;
    let frames: Vec<Frame> = metric
        .values()
        .iter()
        .zip(connection)
        .map(|(g, b)| Frame { sqrt: sym_power(g, 0.5), inv_sqrt: sym_power(g, -0.5), connection: b })
        .collect();
    let w = mu.weights();
    let h = grid.spacing();

    // Right-hand side: X ↦ ∮Tr(η·G^{-1/2}XG^{1/2})dμ has gradient
    // Δy·w·G^{-1/2}SG^{-1/2}, with S = Gη.
    let local: Vec<DMatrix<f64>> =
        eta.lowered().iter().zip(&frames).map(|(s, f)| symmetrize(&(&f.inv_sqrt * s * &f.inv_sqrt))).collect();
    let l2_sq: f64 = local.iter().zip(w).map(|(m, w)| h * w * m.norm_squared()).sum();
    let mass: f64 = w.iter().map(|w| h * w).sum();
    let trace_mean: f64 = local.iter().zip(w).map(|(m, w)| h * w * m.trace()).sum::<f64>() / (dim as f64 * mass);
    let kernel_component = trace_mean.abs() * (dim as f64 * mass).sqrt();

    let op = MatrixOperator { grid, frames, weights: w, dim };
    let rhs_m: Vec<DMatrix<f64>> = local.iter().zip(w).map(|(m, w)| m * (h * w)).collect();
    let rhs = op.pack(&rhs_m);
    let mean_w = mass / grid.length();
    let stride = dim * dim;
    let (sol, iterations, residual) =
        pcg(|v| op.apply(v), |v| fourier_preconditioner(grid, mean_w, stride, v), &rhs)?;
    let value = dot(&rhs, &sol).max(0.0).sqrt();
    Ok(HminusNorm { value, l2: l2_sq.sqrt(), kernel_component, iterations, residual })
}

/// Scalar dual norm on `L²(a⁻¹dθ)` against `∮σ̂²a⁻¹dθ + ∮a·σ̂_θ²dθ`.
pub fn hminus_norm_scalar(sigma: &[f64], a: &[f64], grid: &CircleGrid) -> Result<HminusNorm> {
    if sigma.len() != grid.len() || a.len() != grid.len() {
        return Err(Error::Shape(format!(
            "field has {} samples, weight {}, grid {}",
            sigma.len(),
            a.len(),
            grid.len()
        )));
    }
    if let Some((i, v)) = a.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!("a must be positive; node {i} has {v}")));
    }
    let h = grid.spacing();
    let w: Vec<f64> = a.iter().map(|a| 1.0 / a).collect();
    let mass: f64 = w.iter().map(|w| h * w).sum();
    let l2_sq: f64 = sigma.iter().zip(&w).map(|(s, w)| h * w * s * s).sum();
    let mean = sigma.iter().zip(&w).map(|(s, w)| h * w * s).sum::<f64>() / mass;
    let apply = |x: &[f64]| -> Vec<f64> {
        let dx = grid.derivative(x).expect("sizes agree");
        let flux: Vec<f64> = dx.iter().zip(a).map(|(d, a)| a * d).collect();
        let div = grid.derivative(&flux).expect("sizes agree");
        x.iter().zip(&w).zip(&div).map(|((x, w), d)| h * (w * x - d)).collect()
    };
    let rhs: Vec<f64> = sigma.iter().zip(&w).map(|(s, w)| h * w * s).collect();
    let mean_w = mass / grid.length();
    let (sol, iterations, residual) = pcg(apply, |v| fourier_preconditioner(grid, mean_w, 1, v), &rhs)?;
    Ok(HminusNorm {
        value: dot(&rhs, &sol).max(0.0).sqrt(),
        l2: l2_sq.sqrt(),
        kernel_component: mean.abs() * mass.sqrt(),
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::Scheme;
    use crate::symmat::{expm, SpdField, SpdMatrix};
    use std::f64::consts::PI;

    #[test]
    fn scalar_fourier_modes() {
        let grid = CircleGrid::periodic(64).unwrap();
        for k in 1..=8 {
            let s = grid.sample(|y| (k as f64 * y).cos());
            let n = hminus_norm_scalar(&s, &[1.0; 64], &grid).unwrap();
            let expected = (PI / (1.0 + (k * k) as f64)).sqrt();
            assert!((n.value - expected).abs() < 1e-10, "k={k}: {} vs {expected}", n.value);
        }
    }

    #[test]
    fn scalar_constant_is_l2() {
        let grid = CircleGrid::periodic(32).unwrap();
        let n = hminus_norm_scalar(&[1.5; 32], &[1.0; 32], &grid).unwrap();
        assert!((n.value - 1.5 * (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((n.kernel_component - n.value).abs() < 1e-12);
    }

    fn dense_scalar(sigma: &[f64], a: &[f64], grid: &CircleGrid) -> f64 {
        let n = grid.len();
        let h = grid.spacing();
        let mut d = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = grid.derivative(&e).unwrap();
            for i in 0..n {
                d[(i, j)] = col[i];
            }
        }
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, a.iter().map(|a| h / a)));
        let k = d.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(a)) * &d * h;
        let v = nalgebra::DVector::from_column_slice(sigma);
        let mv = &m * &v;
        let sol = (&m + k).lu().solve(&mv).unwrap();
        mv.dot(&sol).sqrt()
    }

    #[test]
    fn scalar_matches_dense_solve() {
        for n in [64, 128] {
            let grid = CircleGrid::periodic(n).unwrap();
            let s = grid.sample(f64::cos);
            let a = vec![2.0; n];
            let fast = hminus_norm_scalar(&s, &a, &grid).unwrap().value;
            assert!((fast - dense_scalar(&s, &a, &grid)).abs() < 1e-10);
            let a2 = grid.sample(|y| 1.5 + 0.5 * y.sin());
            let fast = hminus_norm_scalar(&s, &a2, &grid).unwrap().value;
            assert!((fast - dense_scalar(&s, &a2, &grid)).abs() < 1e-10);
        }
    }

    #[test]
    fn matrix_identity_section_is_l2() {
        let grid = CircleGrid::new(32, 3.0, Scheme::Fd4).unwrap();
        let g = SpdField::new(
            grid.coords()
                .iter()
                .map(|y| expm(&DMatrix::from_row_slice(2, 2, &[0.3 * y.sin(), 0.2, 0.2, -0.1 * y.cos()])))
                .collect(),
        )
        .unwrap();
        let mu = DensityField::new(grid.sample(|y| 2.0 + y.cos())).unwrap();
        let eta = SelfAdjointSection::scalar(0.7, g);
        let n = hminus_norm_matrix(&eta, &mu, &grid).unwrap();
        let expected = 0.7 * (2.0 * mu.total_mass(&grid)).sqrt();
        assert!((n.value - expected).abs() < 1e-10, "{} {expected}", n.value);
        assert!((n.l2 - expected).abs() < 1e-12);
    }

    #[test]
    fn matrix_agrees_with_scalar_in_one_dimension() {
        let grid = CircleGrid::periodic(64).unwrap();
        let gvals = grid.sample(|y| (0.4 * y.sin()).exp());
        let g = SpdField::new(gvals.iter().map(|v| DMatrix::from_element(1, 1, *v)).collect()).unwrap();
        let a = grid.sample(|y| 1.0 / (1.0 + 0.3 * (2.0 * y).cos()));
        let mu = DensityField::new(a.iter().map(|a| 1.0 / a).collect()).unwrap();
        let sigma = grid.sample(|y| (3.0 * y).sin() + 0.2);
        let lowered = sigma.iter().zip(&gvals).map(|(s, g)| DMatrix::from_element(1, 1, s * g)).collect();
        let eta = SelfAdjointSection::from_lowered(lowered, g).unwrap();
        let m = hminus_norm_matrix(&eta, &mu, &grid).unwrap().value;
        let s = hminus_norm_scalar(&sigma, &a, &grid).unwrap().value;
        assert!((m - s).abs() < 1e-12, "{m} {s}");
    }

    #[test]
    fn zero_section_has_zero_norm() {
        let grid = CircleGrid::periodic(16).unwrap();
        let g = SpdField::constant(&SpdMatrix::identity(3), 16);
        let eta = SelfAdjointSection::scalar(0.0, g);
        let mu = DensityField::uniform(&grid, 2.0).unwrap();
        assert_eq!(hminus_norm_matrix(&eta, &mu, &grid).unwrap().value, 0.0);
    }

    #[test]
    fn rejects_nonpositive_weight() {
        let grid = CircleGrid::periodic(16).unwrap();
        assert!(hminus_norm_scalar(&[1.0; 16], &[0.0; 16], &grid).is_err());
    }
}
