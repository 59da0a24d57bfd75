//! Generator side against operator side for each characterization.

use std::fmt;

use super::generator::check_generator_side;
use super::operator::{
    check_convexity, check_positive_homogeneity, check_subadditivity, check_translation_invariance, OperatorCheck,
};
use super::{Level, Property, PropertyReport, MARGIN_FACTOR};
use crate::catalog;
use crate::error::Result;
use crate::expectation::GExpectation;
use crate::model::{Claim, SampleBox};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    /// Cash invariance of `E_g` iff `g` does not depend on `y`.
    TranslationInvariance,
    /// Convexity of `E_g` iff `g` is `y`-free and convex in `z`.
    Convexity,
    /// Subadditivity of `E_g` iff `g` is `y`-free and subadditive in `z`.
    Subadditivity,
    /// Positive homogeneity of `E_g` iff `g` is positively homogeneous in `(y, z)`.
    PositiveHomogeneity,
}

impl Theorem {
    pub const ALL: [Theorem; 4] = [
        Theorem::TranslationInvariance,
        Theorem::Convexity,
        Theorem::Subadditivity,
        Theorem::PositiveHomogeneity,
    ];

    pub fn property(self) -> Property {
        match self {
            Theorem::TranslationInvariance => Property::TranslationInvariance,
            Theorem::Convexity => Property::Convexity,
            Theorem::Subadditivity => Property::Subadditivity,
            Theorem::PositiveHomogeneity => Property::PositiveHomogeneity,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.property().name() == name)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.property().name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Consistent,
    Inconsistent,
    /// A constituent failed, or the generator fails but the battery holds no operator witness.
    Inconclusive,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Consistent => "consistent",
            Outcome::Inconsistent => "inconsistent",
            Outcome::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone)]
pub struct VerdictConfig<S> {
    pub claims: Vec<Claim<S>>,
    pub constants: Vec<S>,
    pub alphas: Vec<S>,
    pub lambdas: Vec<S>,
    pub sample_box: SampleBox<S>,
    pub samples: usize,
    pub seed: u64,
    pub generator_tol: S,
    /// `None` uses the method default.
    pub operator_tol: Option<S>,
}

impl<S: Scalar> VerdictConfig<S> {
    /// Default battery and grids on `[0, horizon]`.
    pub fn standard(horizon: S) -> Self {
        Self {
            claims: catalog::claim_battery(),
            constants: catalog::scalars(&catalog::CONSTANTS),
            alphas: catalog::scalars(&catalog::ALPHAS),
            lambdas: catalog::scalars(&catalog::LAMBDAS),
            sample_box: SampleBox::standard(horizon),
            samples: 100_000,
            seed: 0,
            generator_tol: S::lit(super::LATTICE_TOL),
            operator_tol: None,
        }
    }
}

/// Unordered pairs `(claims[i], claims[j])`, `i < j`, in battery order.
pub fn all_pairs<S: Scalar>(claims: &[Claim<S>]) -> Vec<(Claim<S>, Claim<S>)> {
    let mut out = Vec::new();
    for i in 0..claims.len() {
        for j in i + 1..claims.len() {
            out.push((claims[i].clone(), claims[j].clone()));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct TheoremVerdict<S> {
    pub theorem: Theorem,
    /// `None` when the generator check itself failed.
    pub generator_side: Option<PropertyReport<S>>,
    pub operator_side: Vec<PropertyReport<S>>,
    pub outcome: Outcome,
    pub consistent: bool,
    pub notes: Vec<String>,
}

fn operator_side<S: Scalar>(theorem: Theorem, ge: &GExpectation<S>, cfg: &VerdictConfig<S>) -> Result<OperatorCheck<S>> {
    let tol = cfg.operator_tol;
    match theorem {
        Theorem::TranslationInvariance => check_translation_invariance(ge, &cfg.claims, &cfg.constants, tol),
        Theorem::Convexity => check_convexity(ge, &all_pairs(&cfg.claims), &cfg.alphas, tol),
        Theorem::Subadditivity => check_subadditivity(ge, &all_pairs(&cfg.claims), tol),
        Theorem::PositiveHomogeneity => check_positive_homogeneity(ge, &cfg.claims, &cfg.lambdas, tol),
    }
}

fn generator_side<S: Scalar>(theorem: Theorem, ge: &GExpectation<S>, cfg: &VerdictConfig<S>) -> Result<PropertyReport<S>> {
    let r = check_generator_side(ge.generator(), &cfg.sample_box, cfg.samples, cfg.seed, cfg.generator_tol)?;
    let level = Level::Generator;
    Ok(match theorem {
        Theorem::TranslationInvariance => r.independence_of_y,
        Theorem::Convexity => PropertyReport::combine(Property::Convexity, level, &[&r.independence_of_y, &r.convexity]),
        Theorem::Subadditivity => {
            PropertyReport::combine(Property::Subadditivity, level, &[&r.independence_of_y, &r.subadditivity])
        }
        Theorem::PositiveHomogeneity => r.positive_homogeneity,
    })
}

/// Both sides of one characterization on the configured battery.
///
/// Consistent means: a passing generator comes with passing operator checks,
/// and a generator failing by more than ten tolerances comes with at least
/// one operator witness.
pub fn theorem_verdict<S: Scalar>(theorem: Theorem, ge: &GExpectation<S>, cfg: &VerdictConfig<S>) -> TheoremVerdict<S> {
    let mut notes = Vec::new();
    let gen = generator_side(theorem, ge, cfg).map_err(|e| notes.push(format!("generator side failed: {e}"))).ok();
    let ops = operator_side(theorem, ge, cfg).map_err(|e| notes.push(format!("operator side failed: {e}"))).ok();
    let operator_side: Vec<PropertyReport<S>> = ops
        .map(|c| vec![c.static_level, c.dynamic_level])
        .unwrap_or_default();

    let outcome = match &gen {
        None => Outcome::Inconclusive,
        Some(_) if operator_side.is_empty() => Outcome::Inconclusive,
        Some(g) if g.pass => {
            if operator_side.iter().all(|r| r.pass) {
                Outcome::Consistent
            } else {
                notes.push("generator passes but an operator check fails".into());
                Outcome::Inconsistent
            }
        }
        Some(g) => {
            if operator_side.iter().any(|r| !r.pass) {
                Outcome::Consistent
            } else {
                if g.max_violation > S::lit(MARGIN_FACTOR) * g.tol {
                    notes.push("generator fails but no operator witness found in the battery".into());
                } else {
                    notes.push("generator fails within the margin and no operator witness found".into());
                }
                Outcome::Inconclusive
            }
        }
    };
    TheoremVerdict {
        theorem,
        generator_side: gen,
        operator_side,
        consistent: outcome == Outcome::Consistent,
        outcome,
        notes,
    }
}
