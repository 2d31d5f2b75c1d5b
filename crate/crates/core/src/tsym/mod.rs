//! Functionals, residuals and AVTD criteria for `T²`-symmetric data with a
//! nonzero twist constant `K`.
//!
//! Nothing here evolves the `T²` system. The functions consume histories,
//! either read from files or generated from the formal large-`τ` expansion
//! ([`expansion_fields`]). Time is the areal `R`, with `τ = −ln R`.

mod avtd;
mod energy;
mod expansion;
pub mod io;
mod residuals;
mod state;

pub use avtd::{avtd_quantities, AvtdReport, AvtdSample, HOLONOMY_SLOPE_TOL, TRIANGLE_TOL};
pub use energy::{energies_k, energy_rates, monotonicity_residual, TsymEnergies};
pub use expansion::{expansion_fields, expansion_history, ExpansionProfile, Trig};
pub use residuals::{field_residuals, twist_residual, FieldResiduals};
pub use state::{TsymFields, TsymHistory, TsymRates, TsymState};
