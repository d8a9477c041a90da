//! Design of hyperconnected relay-transport service networks under demand
//! uncertainty.
//!
//! The crate builds a time-space expansion of a hub network, enumerates
//! candidate round-trip services under hour-of-service limits, formulates the
//! two-stage stochastic program for three hub operation patterns, and solves
//! it with a built-in simplex and branch-and-bound. The [`analysis`] module
//! turns solutions into KPIs, the value of the stochastic solution and
//! pattern/consistency comparisons.
//!
//! The model and solver are generic over [`Scalar`]; `f64` is the working
//! type and [`Rational`] gives exact arithmetic for small models.

pub mod analysis;
pub mod demand;
pub mod error;
pub mod milp;
pub mod network;
pub mod scalar;
pub mod services;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar};

pub type Model = milp::MilpModel<f64>;
pub type Solution = solver::MilpSolution<f64>;
pub type ExactModel = milp::MilpModel<Rational>;
pub type ExactSolution = solver::MilpSolution<Rational>;
