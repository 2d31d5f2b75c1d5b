//! Periodic grids on the circle, derivatives, quadrature and the discrete
//! `H⁻¹` dual norms.

mod grid;
mod hminus;
mod tail;

pub use grid::{CircleGrid, DensityField, Scheme};
pub use hminus::{hminus_norm_matrix, hminus_norm_scalar, HminusNorm, CG_TOLERANCE};
pub use tail::weighted_tail_integral;

use crate::Result;

/// Periodic first derivative of `f` on `grid`.
pub fn periodic_derivative(f: &[f64], grid: &CircleGrid) -> Result<Vec<f64>> {
    grid.derivative(f)
}
