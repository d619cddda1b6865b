//! Hybrid quantum-classical optimization toolkit.
//!
//! Emulated quantum samplers produce bit strings which classical routines
//! post-process, mine for correlations, or draw from as a reservoir, to solve
//! MaxCut, Max k-Cut and maximum independent set. Every pipeline has a
//! no-quantum limit obtained by swapping in a trivially classical sampler.

// `!(a < b)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anneal;
pub mod error;
pub mod graphs;
pub mod postprocess;
pub mod samplers;
pub mod seed;
pub mod spectral;
pub mod varopt;

pub use error::{Error, Result};
