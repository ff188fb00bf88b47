//! Numerical tools for multi-cut log-gas models: equilibrium measures,
//! orthogonal and skew-orthogonal kernels, partition functions, Monte Carlo
//! eigenvalue sampling and bulk universality checks.

pub mod ensemble_mc;
pub mod equilibrium;
pub mod error;
pub mod numerics;
pub mod orthopoly;
pub mod partition;
pub mod potential;
pub mod skew;
pub mod universality;
pub mod verify;

pub use error::{Error, Result};
