//! Operator-level and generator-level property checks, and the verdicts that
//! compare them.

mod generator;
mod operator;
mod transform;
mod verdict;

use std::fmt;

use crate::scalar::Scalar;

pub use generator::{check_generator_side, GeneratorReports};
pub use operator::{
    check_constant_preservation, check_convexity, check_monotonicity, check_positive_homogeneity,
    check_subadditivity, check_translation_invariance, dynamic_indices, OperatorCheck, LSMC_PROBE_PATHS,
};
pub use transform::{transform_identity_checks, TransformCheck, TransformSide};
pub use verdict::{all_pairs, theorem_verdict, Outcome, Theorem, TheoremVerdict, VerdictConfig};

/// Tolerance for identities that hold exactly on the lattice up to rounding.
pub const LATTICE_TOL: f64 = 1e-9;
/// Tolerance for comparisons limited by the discretization.
pub const SCHEME_TOL: f64 = 5e-3;
/// Generator-side failures must exceed this multiple of the tolerance before
/// an operator-side witness is required.
pub const MARGIN_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Property {
    TranslationInvariance,
    Convexity,
    Subadditivity,
    PositiveHomogeneity,
    Monotonicity,
    ConstantPreservation,
    TerminalIdentity,
    /// Generator side of translation invariance.
    IndependenceOfY,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::TranslationInvariance => "translation_invariance",
            Property::Convexity => "convexity",
            Property::Subadditivity => "subadditivity",
            Property::PositiveHomogeneity => "positive_homogeneity",
            Property::Monotonicity => "monotonicity",
            Property::ConstantPreservation => "constant_preservation",
            Property::TerminalIdentity => "terminal_identity",
            Property::IndependenceOfY => "independence_of_y",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    StaticOperator,
    DynamicOperator,
    Generator,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::StaticOperator => "static_operator",
            Level::DynamicOperator => "dynamic_operator",
            Level::Generator => "generator",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance<S> {
    pub label: String,
    pub violation: S,
}

/// Worst violation of one property at one level.
///
/// Operator-level reports keep every instance; generator-level reports keep
/// only the witness, with `instances_tested` counting all samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport<S> {
    pub property: Property,
    pub level: Level,
    pub instances_tested: usize,
    pub instances: Vec<Instance<S>>,
    pub max_violation: S,
    pub witness: Option<String>,
    pub tol: S,
    pub pass: bool,
}

impl<S: Scalar> PropertyReport<S> {
    /// Witness is the first instance attaining the maximum.
    pub fn from_instances(property: Property, level: Level, instances: Vec<Instance<S>>, tol: S) -> Self {
        let mut max_violation = S::zero();
        let mut witness = None;
        for inst in &instances {
            if witness.is_none() || inst.violation > max_violation {
                max_violation = inst.violation;
                witness = Some(inst.label.clone());
            }
        }
        Self {
            property,
            level,
            instances_tested: instances.len(),
            instances,
            max_violation,
            witness,
            tol,
            pass: max_violation <= tol,
        }
    }

    pub fn violation_of(&self, label: &str) -> Option<S> {
        self.instances.iter().find(|i| i.label == label).map(|i| i.violation)
    }

    /// Joins reports on the same level into one, e.g. the two generator
    /// conditions of a theorem. The tolerance is the smallest one.
    pub fn combine(property: Property, level: Level, parts: &[&PropertyReport<S>]) -> Self {
        let tol = parts.iter().map(|p| p.tol).fold(S::infinity(), S::min);
        let instances: Vec<Instance<S>> = parts
            .iter()
            .flat_map(|p| {
                p.instances.iter().map(move |i| Instance {
                    label: format!("{}: {}", p.property, i.label),
                    violation: i.violation,
                })
            })
            .collect();
        let mut report = Self::from_instances(property, level, instances, tol);
        report.instances_tested = parts.iter().map(|p| p.instances_tested).sum();
        report
    }
}
