//! Simulation and verification toolkit for Bayesian incentive-compatible
//! bandit exploration.

pub mod baselines;
pub mod bic_core;
pub mod contextual;
pub mod detail_free;
pub mod env;
pub mod error;
pub mod harness;
pub mod model;
pub mod priors;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
