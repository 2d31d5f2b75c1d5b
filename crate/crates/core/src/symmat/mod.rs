//! Symmetric positive-definite matrices, fields of them over the circle, and
//! endomorphism fields that are self-adjoint with respect to such a field.

mod expm;

pub use expm::expm;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::circle::CircleGrid;
use crate::{Error, Result};

/// Relative symmetry tolerance accepted by [`SpdMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-13;
/// Minimum eigenvalue, relative to the trace, below which positivity is
/// considered lost.
pub const POSITIVITY_TOL: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Symmetrize and check positivity; used after every reconstruction of a
/// metric.
pub fn ensure_spd(m: &DMatrix<f64>, location: Option<String>) -> Result<DMatrix<f64>> {
    let s = symmetrize(m);
    let trace = s.trace();
    let min = min_eigenvalue(&s);
    let threshold = POSITIVITY_TOL * trace.abs();
    if !(min > threshold) || !trace.is_finite() {
        return Err(Error::PositivityLost { min_eigenvalue: min, threshold, location });
    }
    Ok(s)
}

/// Symmetric positive-definite `N×N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
}

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Shape(format!("expected a nonempty square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        let asym = (&m - m.transpose()).norm();
        if asym > SYMMETRY_TOL * m.norm().max(1e-300) {
            return Err(Error::InvalidInput(format!("matrix is not symmetric: ‖M−Mᵀ‖ = {asym:.3e}")));
        }
        Ok(Self { m: ensure_spd(&m, None)? })
    }

    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n, n) }
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.m
    }

    pub fn det(&self) -> f64 {
        self.m.determinant()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        spd_inverse(&self.m)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.m.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `G^p` through the eigendecomposition.
    pub fn power(&self, p: f64) -> DMatrix<f64> {
        sym_power(&self.m, p)
    }
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let inv = match m.clone().cholesky() {
        Some(c) => c.inverse(),
        None => m.clone().try_inverse().expect("matrix is singular"),
    };
    symmetrize(&inv)
}

/// `M^p` for symmetric positive-definite `M`.
pub fn sym_power(m: &DMatrix<f64>, p: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|l| l.powf(p));
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&d) * q.transpose()))
}

/// Field of SPD matrices sampled on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdField {
    dim: usize,
    values: Vec<DMatrix<f64>>,
}

impl SpdField {
    pub fn new(values: Vec<DMatrix<f64>>) -> Result<Self> {
        let dim = values.first().map(|m| m.nrows()).ok_or_else(|| Error::Shape("empty field".into()))?;
        let mut checked = Vec::with_capacity(values.len());
        for (i, m) in values.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Shape(format!("point {i} is {}x{}, expected {dim}x{dim}", m.nrows(), m.ncols())));
            }
            checked.push(ensure_spd(m, Some(format!("point {i}")))?);
        }
        Ok(Self { dim, values: checked })
    }

    pub fn constant(m: &SpdMatrix, points: usize) -> Self {
        Self { dim: m.dim(), values: vec![m.matrix().clone(); points] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn inverses(&self) -> Vec<DMatrix<f64>> {
        self.values.iter().map(spd_inverse).collect()
    }

    /// `G⁻¹G_y` at every point.
    pub fn connection(&self, grid: &CircleGrid) -> Result<Vec<DMatrix<f64>>> {
        let gy = field_derivative(grid, &self.values)?;
        Ok(self.values.iter().zip(&gy).map(|(g, d)| spd_inverse(g) * d).collect())
    }
}

/// Entrywise periodic derivative of a matrix field.
pub fn field_derivative(grid: &CircleGrid, values: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let (r, c) = values.first().map(|m| m.shape()).ok_or_else(|| Error::Shape("empty field".into()))?;
    let mut out = vec![DMatrix::zeros(r, c); values.len()];
    let mut line = vec![0.0; values.len()];
    for i in 0..r {
        for j in 0..c {
            for (l, m) in line.iter_mut().zip(values) {
                *l = m[(i, j)];
            }
            let d = grid.derivative(&line)?;
            for (o, v) in out.iter_mut().zip(d) {
                o[(i, j)] = v;
            }
        }
    }
    Ok(out)
}

/// Endomorphism field `σ` self-adjoint with respect to `G`, stored as the
/// symmetric field `S = Gσ` so the constraint holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAdjointSection {
    lowered: Vec<DMatrix<f64>>,
    metric: SpdField,
}

impl SelfAdjointSection {
    /// Build `σ = G⁻¹S` from symmetric `S` (symmetrized on entry).
    pub fn from_lowered(lowered: Vec<DMatrix<f64>>, metric: SpdField) -> Result<Self> {
        if lowered.len() != metric.len() {
            return Err(Error::Shape(format!("{} values for {} grid points", lowered.len(), metric.len())));
        }
        if lowered.iter().any(|s| s.shape() != (metric.dim(), metric.dim())) {
            return Err(Error::Shape("section and metric dimensions differ".into()));
        }
        let lowered = lowered.iter().map(symmetrize).collect();
        Ok(Self { lowered, metric })
    }

    /// Build from endomorphism values, rejecting them when the
    /// self-adjointness defect exceeds `tol`.
    pub fn from_values(values: &[DMatrix<f64>], metric: SpdField, tol: f64) -> Result<Self> {
        let defect = self_adjoint_defect(values, &metric)?;
        if defect > tol {
            return Err(Error::NotSelfAdjoint { defect });
        }
        let lowered = values.iter().zip(metric.values()).map(|(s, g)| g * s).collect();
        Self::from_lowered(lowered, metric)
    }

    /// Constant multiple of the identity endomorphism.
    pub fn scalar(c: f64, metric: SpdField) -> Self {
        let lowered = metric.values().iter().map(|g| g * c).collect();
        Self { lowered, metric }
    }

    pub fn lowered(&self) -> &[DMatrix<f64>] {
        &self.lowered
    }

    pub fn metric(&self) -> &SpdField {
        &self.metric
    }

    pub fn len(&self) -> usize {
        self.lowered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowered.is_empty()
    }

    /// Endomorphism values `σ = G⁻¹S`.
    pub fn values(&self) -> Vec<DMatrix<f64>> {
        self.lowered.iter().zip(self.metric.values()).map(|(s, g)| spd_inverse(g) * s).collect()
    }
}

/// `max_y ‖σᵀ − GσG⁻¹‖_F / (1 + ‖σ‖_F)`.
pub fn self_adjoint_defect(sigma: &[DMatrix<f64>], metric: &SpdField) -> Result<f64> {
    if sigma.len() != metric.len() {
        return Err(Error::Shape(format!("{} values for {} grid points", sigma.len(), metric.len())));
    }
    let mut worst = 0.0f64;
    for (s, g) in sigma.iter().zip(metric.values()) {
        if s.shape() != g.shape() {
            return Err(Error::Shape(format!("section is {:?}, metric is {:?}", s.shape(), g.shape())));
        }
        let d = (s.transpose() - g * s * spd_inverse(g)).norm() / (1.0 + s.norm());
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Defect of a single matrix; same normalization as [`self_adjoint_defect`].
pub fn matrix_self_adjoint_defect(w: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    (w.transpose() - g * w * spd_inverse(g)).norm() / (1.0 + w.norm())
}

/// `G(s) = G0·exp(sW)`, the geodesic through `G0` with constant velocity
/// `G⁻¹G_s = W`.
pub fn vtd_geodesic(g0: &SpdMatrix, w: &DMatrix<f64>, s: f64) -> Result<SpdMatrix> {
    if w.shape() != (g0.dim(), g0.dim()) {
        return Err(Error::Shape(format!("velocity is {:?}, metric is {}x{}", w.shape(), g0.dim(), g0.dim())));
    }
    let defect = matrix_self_adjoint_defect(w, g0.matrix());
    if defect > 1e-10 {
        return Err(Error::NotSelfAdjoint { defect });
    }
    let g = g0.matrix() * expm(&(w * s));
    Ok(SpdMatrix { m: ensure_spd(&g, Some(format!("s = {s}")))? })
}

/// `σ_y + ½[G⁻¹G_y, σ]` as plain matrices, without projecting back onto the
/// self-adjoint subspace.
pub fn covariant_dy_raw(sigma: &[DMatrix<f64>], metric: &SpdField, grid: &CircleGrid) -> Result<Vec<DMatrix<f64>>> {
    let b = metric.connection(grid)?;
    let ds = field_derivative(grid, sigma)?;
    Ok(ds
        .into_iter()
        .zip(b.iter().zip(sigma))
        .map(|(d, (b, s))| d + (b * s - s * b) * 0.5)
        .collect())
}

/// Covariant derivative `D_yσ` of a self-adjoint section.
pub fn covariant_dy(sigma: &SelfAdjointSection, grid: &CircleGrid) -> Result<SelfAdjointSection> {
    let raw = covariant_dy_raw(&sigma.values(), sigma.metric(), grid)?;
    let lowered = raw.iter().zip(sigma.metric().values()).map(|(d, g)| g * d).collect();
    SelfAdjointSection::from_lowered(lowered, sigma.metric().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use std::f64::consts::PI;

    fn smooth_metric(grid: &CircleGrid) -> SpdField {
        let vals = grid
            .coords()
            .iter()
            .map(|&y| {
                let x = DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        0.3 * y.sin(),
                        0.2 * (2.0 * y).cos(),
                        0.1,
                        0.2 * (2.0 * y).cos(),
                        -0.1 * y.cos(),
                        0.15 * (3.0 * y).sin(),
                        0.1,
                        0.15 * (3.0 * y).sin(),
                        -0.3 * y.sin() + 0.1 * y.cos(),
                    ],
                );
                expm(&x)
            })
            .collect();
        SpdField::new(vals).unwrap()
    }

    fn smooth_lowered(grid: &CircleGrid) -> Vec<DMatrix<f64>> {
        grid.coords()
            .iter()
            .map(|&y| {
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[y.cos(), 0.5 * y.sin(), 0.2, 0.5 * y.sin(), 1.0, (2.0 * y).cos(), 0.2, (2.0 * y).cos(), -0.4],
                )
            })
            .collect()
    }

    #[test]
    fn spd_rejects_asymmetric_and_indefinite() {
        assert!(SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0])).is_err());
        assert!(matches!(
            SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])),
            Err(Error::PositivityLost { .. })
        ));
    }

    #[test]
    fn geodesic_identity_and_diagonal() {
        let id = SpdMatrix::identity(3);
        let g = vtd_geodesic(&id, &DMatrix::zeros(3, 3), 2.7).unwrap();
        assert!((g.matrix() - DMatrix::identity(3, 3)).norm() < 1e-15);
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![0.4, -1.3]));
        let g = vtd_geodesic(&SpdMatrix::identity(2), &w, 1.5).unwrap();
        assert!((g.matrix()[(0, 0)] - (0.6f64).exp()).abs() < 1e-14);
        assert!((g.matrix()[(1, 1)] - (-1.95f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn geodesic_rejects_non_self_adjoint_velocity() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        match vtd_geodesic(&SpdMatrix::identity(2), &w, 1.0) {
            Err(Error::NotSelfAdjoint { defect }) => assert!(defect > 0.1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn defect_of_parametrized_and_scalar_sections_is_zero() {
        let grid = CircleGrid::periodic(32).unwrap();
        let g = smooth_metric(&grid);
        let sec = SelfAdjointSection::from_lowered(smooth_lowered(&grid), g.clone()).unwrap();
        assert!(self_adjoint_defect(&sec.values(), &g).unwrap() < 1e-13);
        let id = SelfAdjointSection::scalar(2.5, g.clone());
        assert!(self_adjoint_defect(&id.values(), &g).unwrap() < 1e-13);
    }

    #[test]
    fn defect_of_antisymmetric_with_identity_metric() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.7, -0.7, 0.0]);
        let g = SpdField::constant(&SpdMatrix::identity(2), 4);
        let d = self_adjoint_defect(&vec![a.clone(); 4], &g).unwrap();
        let expected = 2.0 * a.norm() / (1.0 + a.norm());
        assert!((d - expected).abs() < 1e-15);
    }

    #[test]
    fn covariant_derivative_reduces_to_plain_derivative() {
        let grid = CircleGrid::periodic(32).unwrap();
        let g0 = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let g = SpdField::constant(&g0, 32);
        let sigma: Vec<_> = grid.coords().iter().map(|y| DMatrix::identity(2, 2) * y.sin()).collect();
        let d = covariant_dy_raw(&sigma, &g, &grid).unwrap();
        for (y, m) in grid.coords().iter().zip(&d) {
            assert!((m - DMatrix::identity(2, 2) * y.cos()).norm() < 1e-12);
        }
        let c = SelfAdjointSection::scalar(3.0, smooth_metric(&grid));
        let dc = covariant_dy(&c, &grid).unwrap();
        assert!(dc.values().iter().all(|m| m.norm() < 1e-12));
    }

    #[test]
    fn covariant_derivative_preserves_self_adjointness() {
        let defect = |n| {
            let grid = CircleGrid::periodic(n).unwrap();
            let g = smooth_metric(&grid);
            let sec = SelfAdjointSection::from_lowered(smooth_lowered(&grid), g.clone()).unwrap();
            let raw = covariant_dy_raw(&sec.values(), &g, &grid).unwrap();
            self_adjoint_defect(&raw, &g).unwrap()
        };
        assert!(defect(512) < 1e-8);
        assert!(defect(64) < 1e-8);
    }

    #[test]
    fn covariant_integration_by_parts() {
        let grid = CircleGrid::periodic(128).unwrap();
        let g = smooth_metric(&grid);
        let s1 = SelfAdjointSection::from_lowered(smooth_lowered(&grid), g.clone()).unwrap();
        let l2: Vec<_> = grid
            .coords()
            .iter()
            .map(|&y| DMatrix::from_row_slice(3, 3, &[1.0, y.cos(), 0.0, y.cos(), (2.0 * y).sin(), 0.3, 0.0, 0.3, 2.0]))
            .collect();
        let s2 = SelfAdjointSection::from_lowered(l2, g).unwrap();
        let d1 = covariant_dy(&s1, &grid).unwrap().values();
        let d2 = covariant_dy(&s2, &grid).unwrap().values();
        let v1 = s1.values();
        let v2 = s2.values();
        let integrand: Vec<f64> = (0..grid.len()).map(|i| (&d1[i] * &v2[i] + &v1[i] * &d2[i]).trace()).collect();
        assert!(grid.integrate(&integrand).abs() < 1e-10);
        assert!((grid.length() - 2.0 * PI).abs() < 1e-15);
    }
}
