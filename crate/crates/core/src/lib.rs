//! Linearized Bayesian inversion for finite-element parameter fields.
//!
//! The prior is a Gaussian random field whose covariance is the inverse
//! square of an elliptic operator, the likelihood comes from a
//! parameter-to-observable map with additive Gaussian noise, and the
//! posterior is approximated by a Gaussian centred at the MAP point whose
//! covariance is a low-rank update of the prior. Every operator is applied
//! matrix-free and all adjoints are taken in the mass-weighted inner
//! product so that results are consistent under mesh refinement.

pub mod error;
pub mod fem;
pub mod forward;
pub mod lowrank;
pub mod map_solver;
pub mod prior;
pub mod rng;

pub use error::{Error, Result};
