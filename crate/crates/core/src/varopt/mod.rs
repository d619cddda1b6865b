//! Variational parameter search: objective estimates from post-processed
//! shots, a bounded derivative-free optimizer, nested quantum/classical
//! search for the spectral pipeline and QAOA angle setup.

mod angles;
mod dfo;
mod nested;
mod objective;

pub use angles::{
    canonical_odd_degree, generic_start, interp_angles, optimize_angle_ladder, optimize_angles,
    qaoa_angle_setup, regular_degree, AngleMode, AngleSettings, AngleTable, BETA_MAX, GAMMA_MAX,
};
pub use dfo::{
    dfo_maximize, DfoOutcome, Evaluation, HistoryEntry, SearchBox, StopReason, STALL_EVALS,
};
pub use nested::{
    inner_objective, nested_optimize_spectral, NestedOutcome, NestedSettings, OuterRecord,
};
pub use objective::{
    anneal_protocol_from, estimate_objective, mean_stderr, spectral_params_from, Estimate,
    MisSource, ObjectiveSpec, Pipeline,
};
