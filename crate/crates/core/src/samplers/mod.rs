//! Variational samplers: each produces bit strings `{z}` from a parameterised
//! distribution `P(z | alpha)`.

mod qaoa;
mod rydberg;
mod shots;
mod statevector;

pub use qaoa::{
    qaoa_expectation, qaoa_sample, qaoa_state, QaoaInstance, QaoaParams, DEFAULT_QAOA_QUBIT_CAP,
};
pub use rydberg::{
    anneal_distribution, anneal_meta, anneal_sample, anneal_state, quench_distribution,
    quench_meta, quench_sample, quench_state, rydberg_evolve, AnnealProtocol, ConstantDrive, Drive,
    PiecewiseDrive, QuenchParams, RydbergModel, Waveform, DEFAULT_BLOCKADE_RADIUS, DEFAULT_OMEGA,
    DEFAULT_SPACING,
};
pub use shots::{
    constant_sample, estimate_occupations, load_shots, parse_shots, save_shots, uniform_sample,
    write_shots, ConstantValue, Occupations, OutcomeDistribution, ShotMeta, ShotSet,
};
pub use statevector::StateVector;
