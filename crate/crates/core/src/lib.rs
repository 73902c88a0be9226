//! Potential theory and local-time penalisation for one-dimensional Lévy
//! processes with regular points, with a Monte-Carlo verification harness.

pub mod bessel;
pub mod cli;
pub mod error;
pub mod model;
pub mod penalization;
pub mod potential;
pub mod quadrature;
pub mod resolvent;
pub mod simulation;
pub mod stable;
pub mod stats;
pub mod verification;

pub use error::{Error, Result};
pub use model::LevyModel;
