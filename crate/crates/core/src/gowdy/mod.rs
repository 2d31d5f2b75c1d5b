//! `T^N`-Gowdy evolution toward the singularity in the conformal gauge
//! `√det G = T`, with `s = −ln T` (singularity at `s → +∞`; the areal
//! logarithmic time is `τ = (2/N)s`).
//!
//! The evolved system is `G_s = GÃ`, `Ã_s = e^{−2s}(G⁻¹G_y)_y`.

mod avtd;
mod data;
mod energy;
mod evolve;
pub mod io;
mod state;

pub use avtd::{avtd_defect, decay_certificate, twist_density_check, weak_form_check, WeakTestSection};
pub use data::{bessel_j, extract_pq, homogeneous_state, init_from_pq, random_state, PolarizedBessel, RandomData};
pub use energy::{energies, energy_densities, energy_identities, GowdyEnergies};
pub use evolve::{cfl_limit, evolve, evolve_with, EvolveOptions, Trajectory, DEFAULT_DS_CAP, FILTER_INTERVAL, MAX_DET_CORRECTION};
pub use state::{ConstraintReport, GowdyState, DET_TOL, TRACE_TOL};
