//! BSDE discretizations: a recombining lattice (one dimension, terminal
//! claims) and least-squares Monte Carlo (any dimension, path functionals).

pub mod lattice;
pub mod lsmc;
pub mod paths;
pub mod regression;

pub use lattice::{conditional_slice, solve_lattice, LatticeScheme, LatticeSolution, LatticeSolver, StepTime};
pub use lsmc::{solve_lsmc, solve_lsmc_with, LsmcConditional, LsmcOptions, LsmcSolution, StepFit};
pub use paths::{simulate_paths, PathBundle};
pub use regression::Basis;
