//! Numerical g-expectations.
//!
//! Solves backward SDEs `y_t = xi + int_t^T g(s, y_s, z_s) ds - int_t^T z_s dB_s`
//! on a recombining lattice and by least-squares Monte Carlo, builds the
//! (conditional) g-expectation and the induced risk measures on top, and
//! checks how properties of the driver `g` show up in the operators.
//!
//! All numerics are generic over [`Scalar`]; the `*F64` aliases at the crate
//! root are the production instantiation.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
pub mod expectation;
pub mod gdsl;
pub mod model;
pub mod properties;
pub mod representation;
pub mod risk;
pub mod rng;
pub mod scalar;
pub mod solvers;

pub use error::{Error, EvalError, Result};
pub use scalar::Scalar;

pub type TimeGridF64 = model::TimeGrid<f64>;
pub type GeneratorSpecF64 = model::GeneratorSpec<f64>;
pub type ClaimF64 = model::Claim<f64>;
pub type AssumptionReportF64 = model::AssumptionReport<f64>;
pub type LatticeSolutionF64 = solvers::LatticeSolution<f64>;
pub type LsmcSolutionF64 = solvers::LsmcSolution<f64>;
pub type PathBundleF64 = solvers::PathBundle<f64>;
pub type GExpectationF64 = expectation::GExpectation<f64>;
pub type GExpectationResultF64 = expectation::GExpectationResult<f64>;
pub type RecoveryResultF64 = representation::RecoveryResult<f64>;
pub type PropertyReportF64 = properties::PropertyReport<f64>;
pub type TheoremVerdictF64 = properties::TheoremVerdict<f64>;
pub type RiskClassificationF64 = risk::RiskClassification<f64>;

pub type TimeGridF32 = model::TimeGrid<f32>;
pub type GeneratorSpecF32 = model::GeneratorSpec<f32>;
pub type ClaimF32 = model::Claim<f32>;
pub type LatticeSolutionF32 = solvers::LatticeSolution<f32>;
