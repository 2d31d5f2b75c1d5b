use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::symmat::{spd_inverse, symmetrize, SpdMatrix};
use crate::{Error, Result};

/// One warped factor `a²ĥ` of the spatial metric. The fixed metric `ĥ` has
/// `Ric = ε(dim − 1)ĥ` and is taken to be a space form, so its sectional
/// curvature is `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub dim: usize,
    pub epsilon: i8,
    /// Scale factor `a`.
    pub scale: f64,
    /// Eigenvalue `κ` of `h⁻¹K` on the block.
    pub kappa: f64,
    /// Volume of `ĥ`.
    pub vol0: f64,
}

impl Block {
    pub fn new(dim: usize, epsilon: i8, scale: f64, kappa: f64, vol0: f64) -> Self {
        Self { dim, epsilon, scale, kappa, vol0 }
    }

    /// Mixed Ricci eigenvalue `ε(dim − 1)/a²`.
    pub fn ricci(&self) -> f64 {
        f64::from(self.epsilon) * (self.dim as f64 - 1.0) / (self.scale * self.scale)
    }
}

/// Spatially homogeneous CMC Einstein flow on a product of warped blocks,
/// at one Hubble time `t = −n/H`.
///
/// The momentum constraint holds identically for such data, so only the
/// Hamiltonian constraint is tracked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiWarpedFlow {
    pub blocks: Vec<Block>,
    pub t: f64,
}

impl MultiWarpedFlow {
    pub fn new(blocks: Vec<Block>, t: f64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("a flow needs at least one block".into()));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("Hubble time must be positive, got {t}")));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.dim == 0 || !(-1..=1).contains(&b.epsilon) {
                return Err(Error::InvalidInput(format!("block {i}: dim {} and ε {} not allowed", b.dim, b.epsilon)));
            }
            if !(b.scale > 0.0 && b.scale.is_finite()) || !b.kappa.is_finite() || !(b.vol0 > 0.0) {
                return Err(Error::InvalidInput(format!("block {i}: scale, κ or vol0 out of range")));
            }
        }
        Ok(Self { blocks, t })
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    pub fn mean_curvature(&self) -> f64 {
        self.blocks.iter().map(|b| b.dim as f64 * b.kappa).sum()
    }

    /// `|K|² = Σ nᵢκᵢ²`.
    pub fn k_squared(&self) -> f64 {
        self.blocks.iter().map(|b| b.dim as f64 * b.kappa * b.kappa).sum()
    }

    /// `|K⁰|² = |K|² − H²/n`.
    pub fn traceless_squared(&self) -> f64 {
        let h = self.mean_curvature();
        (self.k_squared() - h * h / self.dim() as f64).max(0.0)
    }

    pub fn scalar_curvature(&self) -> f64 {
        self.blocks.iter().map(|b| b.dim as f64 * b.ricci()).sum()
    }

    /// `R − |K⁰|² + (1 − 1/n)H²`.
    pub fn hamiltonian_residual(&self) -> f64 {
        let n = self.dim() as f64;
        let h = self.mean_curvature();
        self.scalar_curvature() - self.traceless_squared() + (1.0 - 1.0 / n) * h * h
    }

    /// Hamiltonian residual relative to `H²`.
    pub fn constraint_drift(&self) -> f64 {
        let h = self.mean_curvature();
        self.hamiltonian_residual().abs() / (h * h)
    }

    /// `|H + n/t| / |H|`.
    pub fn hubble_drift(&self) -> f64 {
        let h = self.mean_curvature();
        (h + self.dim() as f64 / self.t).abs() / h.abs()
    }

    /// Lapse of the Hubble-CMC gauge: with `∂H/∂t = n/t²` the lapse equation
    /// reduces to `L = (n/t²)/(|K⁰|² + H²/n)` for homogeneous data.
    pub fn lapse(&self) -> f64 {
        let n = self.dim() as f64;
        n / (self.t * self.t) / self.k_squared()
    }

    /// `vol(X, h) = Π aᵢ^{nᵢ} vol0ᵢ`.
    pub fn volume(&self) -> f64 {
        self.blocks.iter().map(|b| b.scale.powi(b.dim as i32) * b.vol0).product()
    }

    /// `(−H)ⁿ vol`.
    pub fn v_n(&self) -> f64 {
        (-self.mean_curvature()).powi(self.dim() as i32) * self.volume()
    }

    /// `(−H) vol`.
    pub fn v_1(&self) -> f64 {
        -self.mean_curvature() * self.volume()
    }

    /// `d/dt` of `(a, κ)` for each block.
    pub fn rates(&self) -> Vec<(f64, f64)> {
        let l = self.lapse();
        let h = self.mean_curvature();
        self.blocks
            .iter()
            .map(|b| (-l * b.kappa * b.scale, l * h * b.kappa + l * b.ricci()))
            .collect()
    }

    /// `L_s(u) = L(su)`, `h_s = s⁻²h(su)`, `K_s = s⁻¹K(su)`: the flow at `t`
    /// becomes the rescaled flow at `u = t/s`.
    pub fn rescale(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("rescaling factor must be positive, got {s}")));
        }
        let blocks = self.blocks.iter().map(|b| Block { scale: b.scale / s, kappa: b.kappa * s, ..*b }).collect();
        Ok(Self { blocks, t: self.t / s })
    }

    /// `Π aᵢ^{nᵢ}`, so `(−H)dvol_h = density·dvol_ĥ` with the density
    /// below.
    pub fn volume_density(&self) -> f64 {
        -self.mean_curvature() * self.blocks.iter().map(|b| b.scale.powi(b.dim as i32)).product::<f64>()
    }

    pub fn reference_volume(&self) -> f64 {
        self.blocks.iter().map(|b| b.vol0).product()
    }
}

/// Flat homogeneous flow in matrix form: `h` and `K` on `ℝⁿ` (or a torus).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFlow {
    pub h: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub t: f64,
}

impl MatrixFlow {
    pub fn new(h: DMatrix<f64>, k: DMatrix<f64>, t: f64) -> Result<Self> {
        if h.shape() != k.shape() || !h.is_square() {
            return Err(Error::Shape(format!("h is {:?}, K is {:?}", h.shape(), k.shape())));
        }
        if !(t > 0.0) {
            return Err(Error::InvalidInput(format!("Hubble time must be positive, got {t}")));
        }
        let h = SpdMatrix::new(h)?.into_inner();
        Ok(Self { h, k: symmetrize(&k), t })
    }

    /// Matrix form of a flow whose blocks are all flat.
    pub fn from_blocks(flow: &MultiWarpedFlow) -> Result<Self> {
        let mut h = Vec::new();
        let mut k = Vec::new();
        for (i, b) in flow.blocks.iter().enumerate() {
            if b.epsilon != 0 && b.dim > 1 {
                return Err(Error::InvalidInput(format!("block {i} is curved; matrix flows are flat")));
            }
            for _ in 0..b.dim {
                h.push(b.scale * b.scale);
                k.push(b.kappa * b.scale * b.scale);
            }
        }
        Self::new(DMatrix::from_diagonal(&h.into()), DMatrix::from_diagonal(&k.into()), flow.t)
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// `h⁻¹K`.
    pub fn shape_operator(&self) -> DMatrix<f64> {
        spd_inverse(&self.h) * &self.k
    }

    pub fn mean_curvature(&self) -> f64 {
        self.shape_operator().trace()
    }

    pub fn k_squared(&self) -> f64 {
        let s = self.shape_operator();
        (&s * &s).trace()
    }

    /// `|K|² − H²`, the Hamiltonian residual of a flat slice.
    pub fn hamiltonian_residual(&self) -> f64 {
        let h = self.mean_curvature();
        self.k_squared() - h * h
    }

    pub fn lapse(&self) -> f64 {
        self.dim() as f64 / (self.t * self.t) / self.k_squared()
    }

    pub fn rescale(&self, s: f64) -> Result<Self> {
        Self::new(&self.h / (s * s), &self.k / s, self.t / s)
    }
}
