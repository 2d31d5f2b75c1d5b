use nalgebra::DMatrix;

use crate::circle::{CircleGrid, DensityField};
use crate::symmat::{field_derivative, matrix_self_adjoint_defect, spd_inverse, symmetrize, SpdField};
use crate::{Error, Result};

/// Tolerances applied when a state is constructed from external data.
pub const DET_TOL: f64 = 1e-8;
pub const TRACE_TOL: f64 = 1e-8;

/// Gowdy data at log-conformal time `s = −ln T`: the orbit metric `G` with
/// `det G = e^{−2s}` and its velocity `Ã = G⁻¹G_s`, stored lowered as the
/// symmetric field `Π = GÃ = G_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct GowdyState {
    grid: CircleGrid,
    s: f64,
    g: Vec<DMatrix<f64>>,
    pi: Vec<DMatrix<f64>>,
}

/// Worst violations of the state constraints over the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    /// `max |det G · e^{2s} − 1|`.
    pub det: f64,
    /// `max |tr Ã + 2|`.
    pub trace: f64,
    /// `max |tr(G⁻¹G_y)|`.
    pub connection_trace: f64,
    /// Largest self-adjointness defect of `Ã`.
    pub self_adjoint: f64,
}

impl ConstraintReport {
    pub fn worst(&self) -> f64 {
        self.det.max(self.trace).max(self.connection_trace).max(self.self_adjoint)
    }
}

impl GowdyState {
    /// Build from `G` and `Ã`, checking every constraint.
    pub fn new(grid: CircleGrid, s: f64, g: Vec<DMatrix<f64>>, atilde: Vec<DMatrix<f64>>) -> Result<Self> {
        let field = SpdField::new(g)?;
        if field.len() != grid.len() || atilde.len() != grid.len() {
            return Err(Error::Shape(format!(
                "grid has {} points, G has {}, Ã has {}",
                grid.len(),
                field.len(),
                atilde.len()
            )));
        }
        let dim = field.dim();
        if atilde.iter().any(|a| a.shape() != (dim, dim)) {
            return Err(Error::Shape("Ã and G dimensions differ".into()));
        }
        for (i, (a, g)) in atilde.iter().zip(field.values()).enumerate() {
            let d = matrix_self_adjoint_defect(a, g);
            if d > 1e-10 {
                return Err(Error::Hypothesis(format!("Ã is not self-adjoint at point {i} (defect {d:.3e})")));
            }
        }
        let g = field.values().to_vec();
        let pi = g.iter().zip(&atilde).map(|(g, a)| symmetrize(&(g * a))).collect();
        let state = Self { grid, s, g, pi };
        let rep = state.constraints()?;
        if rep.det > DET_TOL {
            return Err(Error::Hypothesis(format!("det G differs from e^(-2s) by {:.3e}", rep.det)));
        }
        if rep.trace > TRACE_TOL {
            return Err(Error::Hypothesis(format!("tr Ã differs from -2 by {:.3e}", rep.trace)));
        }
        Ok(state)
    }

    /// Build without checking the determinant and trace constraints; used for
    /// negative controls and by the evolver.
    pub fn from_parts_unchecked(grid: CircleGrid, s: f64, g: Vec<DMatrix<f64>>, pi: Vec<DMatrix<f64>>) -> Self {
        Self { grid, s, g, pi }
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Conformal time `T = e^{−s}`.
    pub fn t(&self) -> f64 {
        (-self.s).exp()
    }

    pub fn dim(&self) -> usize {
        self.g[0].nrows()
    }

    pub fn g(&self) -> &[DMatrix<f64>] {
        &self.g
    }

    /// `G_s = GÃ`.
    pub fn lowered_velocity(&self) -> &[DMatrix<f64>] {
        &self.pi
    }

    pub fn metric(&self) -> Result<SpdField> {
        SpdField::new(self.g.clone())
    }

    pub fn atilde(&self) -> Vec<DMatrix<f64>> {
        self.g.iter().zip(&self.pi).map(|(g, p)| spd_inverse(g) * p).collect()
    }

    /// `B = G⁻¹G_y`.
    pub fn connection(&self) -> Result<Vec<DMatrix<f64>>> {
        let gy = field_derivative(&self.grid, &self.g)?;
        Ok(self.g.iter().zip(&gy).map(|(g, d)| spd_inverse(g) * d).collect())
    }

    /// Twist density weights `−√det G · e^s · tr Ã`, which equal 2 in this
    /// gauge.
    pub fn twist_density(&self) -> Vec<f64> {
        let es = self.s.exp();
        self.g
            .iter()
            .zip(self.atilde())
            .map(|(g, a)| -g.determinant().max(0.0).sqrt() * es * a.trace())
            .collect()
    }

    /// The density `μ = 2dy` used by the decay certificate.
    pub fn mu(&self) -> DensityField {
        DensityField::uniform(&self.grid, 2.0).expect("positive constant")
    }

    pub fn constraints(&self) -> Result<ConstraintReport> {
        let target = (-2.0 * self.s).exp();
        let a = self.atilde();
        let b = self.connection()?;
        let mut rep = ConstraintReport { det: 0.0, trace: 0.0, connection_trace: 0.0, self_adjoint: 0.0 };
        for ((g, a), b) in self.g.iter().zip(&a).zip(&b) {
            rep.det = rep.det.max((g.determinant() / target - 1.0).abs());
            rep.trace = rep.trace.max((a.trace() + 2.0).abs());
            rep.connection_trace = rep.connection_trace.max(b.trace().abs());
            rep.self_adjoint = rep.self_adjoint.max(matrix_self_adjoint_defect(a, g));
        }
        Ok(rep)
    }
}
