//! Homogeneous CMC Einstein flows toward a crushing singularity, in Hubble
//! time `t = −n/H`.
//!
//! A flow is a product of warped blocks `aᵢ²ĥᵢ` over space forms, which is
//! enough for cones, cone × torus, Kantowski–Sachs and Kasner. The module
//! evolves such flows, tracks the monotone volumes `(−H)ⁿvol` and `(−H)vol`,
//! rescales them, reconstructs Kasner data from flat histories and measures
//! curvature and causal-past radii.

mod causal;
mod curvature;
mod evolve;
mod family;
mod flow;
mod kasner;
mod monotone;

pub use causal::{causal_radius, disjointness, CausalRadius, DIVERGENCE_TOL};
pub use curvature::{curvature_report, CurvatureReport, CURVATURE_STEP};
pub use evolve::{evolve_cmc, CmcTrajectory, INITIAL_CONSTRAINT_TOL, INITIAL_HUBBLE_TOL, MAX_CONSTRAINT_DRIFT};
pub use family::{make_family, Family, FamilySpec, FlowSource, Rescaled, KASNER_PARAM_TOL};
pub use flow::{Block, MatrixFlow, MultiWarpedFlow};
pub use kasner::{kasner_reconstruct, KasnerReconstruction};
pub use monotone::{
    dvol0_limit, kasner_limit_check, kasner_limit_integrals, lapse_bounds, monotone_quantities, v1_integral_identity, Dvol0,
    CURVATURE_SIGN_TOL, DVOL0_ZERO_TOL, KASNER_LIMIT_TOL, MONOTONE_TOL,
};
