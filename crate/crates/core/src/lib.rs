//! Numerical laboratory for vacuum cosmological singularities.
//!
//! The crate is organised by the structure being evolved or checked:
//!
//! * [`symmat`]: positive-definite matrices, sections that are self-adjoint
//!   with respect to a varying metric, and the covariant derivative `D_y`.
//! * [`circle`]: periodic grids on the circle, derivatives, quadrature and the
//!   discrete `H⁻¹` dual norms.
//! * [`gowdy`]: `T^N`-Gowdy evolution toward the singularity, its monotone
//!   energies and the `H⁻¹` AVTD decay certificate.
//! * [`tsym`]: functionals and AVTD criteria for `T²`-symmetric twisted data.
//! * [`cmc`]: homogeneous CMC Einstein flows, monotone volumes, Kasner
//!   reconstruction, curvature and causal-past radii.
//! * [`run`]: JSON scenarios, CSV output and digest manifests.
//!
//! Every check returns a [`Certificate`] that carries the sampled values, the
//! fitted quantities and the verdict.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod circle;
pub mod cmc;
mod error;
pub mod gowdy;
pub mod quad;
pub mod run;
pub mod symmat;
pub mod tsym;

pub use certificate::{Certificate, Verdict};
pub use error::{Error, Result};
