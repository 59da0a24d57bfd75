//! Risk measures `rho(X) = E_g[-X]` and `rho_t(X) = E_g[-X | F_t]`.
//!
//! [`classify`] decides the monetary/convex/coherent class twice: from axiom
//! checks on `rho` and `rho_t`, and from sampled properties of `g`. The two
//! routes must agree.

use crate::catalog;
use crate::error::{Error, Result};
use crate::expectation::{ConditionalRepresentation, GExpectation, Method};
use crate::model::{Claim, SampleBox};
use crate::properties::{
    all_pairs, check_convexity, check_generator_side, check_monotonicity, check_positive_homogeneity,
    check_translation_invariance, Instance, Level, Property, PropertyReport, LATTICE_TOL,
};
use crate::scalar::Scalar;

pub fn rho_static<S: Scalar>(ge: &GExpectation<S>, position: &Claim<S>) -> Result<S> {
    Ok(ge.evaluate(&position.negated())?.value)
}

pub fn rho_dynamic<S: Scalar>(
    ge: &GExpectation<S>,
    position: &Claim<S>,
    t_index: usize,
) -> Result<ConditionalRepresentation<S>> {
    ge.conditional(&position.negated(), t_index)
}

/// Class membership; `coherent => convex => monetary` holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RiskVerdicts {
    pub monetary: bool,
    pub convex: bool,
    pub coherent: bool,
}

impl RiskVerdicts {
    pub fn new(monetary: bool, convex: bool, coherent: bool) -> Self {
        let convex = convex && monetary;
        Self {
            monetary,
            convex,
            coherent: coherent && convex,
        }
    }

    /// Strongest class, or `"none"`.
    pub fn class(&self) -> &'static str {
        if self.coherent {
            "coherent"
        } else if self.convex {
            "convex"
        } else if self.monetary {
            "monetary"
        } else {
            "none"
        }
    }

    fn and(self, other: Self) -> Self {
        Self::new(
            self.monetary && other.monetary,
            self.convex && other.convex,
            self.coherent && other.coherent,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    OperatorTested,
    GeneratorImplied,
}

#[derive(Debug, Clone)]
pub struct RiskConfig<S> {
    pub positions: Vec<Claim<S>>,
    pub constants: Vec<S>,
    /// Convex-combination weights.
    pub alphas: Vec<S>,
    /// Homogeneity factors.
    pub lambdas: Vec<S>,
    pub sample_box: SampleBox<S>,
    pub samples: usize,
    pub seed: u64,
    pub generator_tol: S,
    /// `None` uses the method default.
    pub operator_tol: Option<S>,
}

impl<S: Scalar> RiskConfig<S> {
    pub fn standard(horizon: S) -> Self {
        Self {
            positions: catalog::claim_battery(),
            constants: catalog::scalars(&catalog::CONSTANTS),
            alphas: catalog::scalars(&catalog::ALPHAS),
            lambdas: catalog::scalars(&catalog::LAMBDAS),
            sample_box: SampleBox::standard(horizon),
            samples: 100_000,
            seed: 0,
            generator_tol: S::lit(LATTICE_TOL),
            operator_tol: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiskClassification<S> {
    pub monetary: bool,
    pub convex: bool,
    pub coherent: bool,
    /// Always [`Route::OperatorTested`]: the verdict comes from the axiom
    /// reports and is confirmed by the generator route.
    pub route: Route,
    pub static_verdicts: RiskVerdicts,
    pub dynamic_verdicts: RiskVerdicts,
    pub operator_route: RiskVerdicts,
    pub generator_route: RiskVerdicts,
    /// A static class is never lost at the dynamic level.
    pub static_implies_dynamic: bool,
    /// Axioms on `rho` and `rho_t`, static report before dynamic.
    pub axiom_reports: Vec<PropertyReport<S>>,
    pub generator_reports: Vec<PropertyReport<S>>,
}

impl<S: Scalar> RiskClassification<S> {
    pub fn verdicts(&self) -> RiskVerdicts {
        RiskVerdicts::new(self.monetary, self.convex, self.coherent)
    }

    pub fn report(&self, property: Property, level: Level) -> Option<&PropertyReport<S>> {
        self.axiom_reports
            .iter()
            .find(|r| r.property == property && r.level == level)
    }
}

/// `|rho_T(X) + X|` at every terminal node (or probe path for LSMC).
fn terminal_identity<S: Scalar>(ge: &GExpectation<S>, positions: &[Claim<S>], tol: S) -> Result<PropertyReport<S>> {
    let n = ge.grid().steps();
    let instances = positions
        .iter()
        .map(|x| {
            let rep = rho_dynamic(ge, x, n)?;
            let worst = match (&rep, ge.method()) {
                (ConditionalRepresentation::Lattice { states, values, .. }, _) => {
                    let mut worst = S::zero();
                    for (&s, &v) in states.iter().zip(values) {
                        let xv = x.eval_terminal(&[s]).map_err(|e| Error::eval(x.label(), e))?;
                        worst = worst.max((v + xv).abs());
                    }
                    worst
                }
                (ConditionalRepresentation::Lsmc { .. }, Method::Lsmc(_)) => {
                    let paths = ge.paths()?;
                    let mut worst = S::zero();
                    for m in 0..paths.paths().min(crate::properties::LSMC_PROBE_PATHS) {
                        let pos = paths.positions(m);
                        let view = crate::model::PathView::new(paths.dim(), &pos);
                        let v = rep.eval(view.terminal())?;
                        let xv = x.eval_path(&view).map_err(|e| Error::eval(x.label(), e))?;
                        worst = worst.max((v + xv).abs());
                    }
                    worst
                }
                _ => unreachable!("representation follows the method"),
            };
            Ok(Instance {
                label: format!("X={}", x.label()),
                violation: worst,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PropertyReport::from_instances(
        Property::TerminalIdentity,
        Level::DynamicOperator,
        instances,
        tol,
    ))
}

/// Operator-route and generator-route classification of `rho = E_g[-.]`.
///
/// Axioms are checked on the negated battery: `rho(X + c) = rho(X) - c` is
/// cash invariance of `E_g` at `-X` with shift `-c`, and so on. Monotonicity
/// uses the pairs `X <= max(X, Y)`.
pub fn classify<S: Scalar>(ge: &GExpectation<S>, cfg: &RiskConfig<S>) -> Result<RiskClassification<S>> {
    if cfg.positions.is_empty() {
        return Err(Error::InvalidInput("position battery must not be empty".into()));
    }
    let tol = cfg.operator_tol;
    let neg: Vec<Claim<S>> = cfg.positions.iter().map(Claim::negated).collect();
    let neg_constants: Vec<S> = cfg.constants.iter().map(|&c| -c).collect();

    let mut ordered = Vec::new();
    for (i, x) in cfg.positions.iter().enumerate() {
        for (j, y) in cfg.positions.iter().enumerate() {
            if i != j {
                ordered.push((x.pointwise_max(y).negated(), x.negated()));
            }
        }
    }
    if ordered.is_empty() {
        let x = &cfg.positions[0];
        ordered.push((x.shifted(S::one()).negated(), x.negated()));
    }

    let mono = check_monotonicity(ge, &ordered, tol)?;
    let trans = check_translation_invariance(ge, &neg, &neg_constants, tol)?;
    let conv_pairs = if neg.len() > 1 {
        all_pairs(&neg)
    } else {
        vec![(neg[0].clone(), neg[0].clone())]
    };
    let conv = check_convexity(ge, &conv_pairs, &cfg.alphas, tol)?;
    let homog = check_positive_homogeneity(ge, &neg, &cfg.lambdas, tol)?;
    let terminal = terminal_identity(ge, &cfg.positions, tol.unwrap_or(mono.static_level.tol))?;

    let static_verdicts = RiskVerdicts::new(
        mono.static_level.pass && trans.static_level.pass,
        conv.static_level.pass,
        homog.static_level.pass,
    );
    let dynamic_verdicts = RiskVerdicts::new(
        mono.dynamic_level.pass && trans.dynamic_level.pass && terminal.pass,
        conv.dynamic_level.pass,
        homog.dynamic_level.pass,
    );
    let operator_route = static_verdicts.and(dynamic_verdicts);
    let static_implies_dynamic = (!static_verdicts.monetary || dynamic_verdicts.monetary)
        && (!static_verdicts.convex || dynamic_verdicts.convex)
        && (!static_verdicts.coherent || dynamic_verdicts.coherent);

    let gen = check_generator_side(ge.generator(), &cfg.sample_box, cfg.samples, cfg.seed, cfg.generator_tol)?;
    let y_free = gen.independence_of_y.pass;
    let generator_route = RiskVerdicts::new(
        y_free,
        y_free && gen.convexity.pass,
        y_free && gen.subadditivity.pass && gen.positive_homogeneity.pass,
    );

    let mut axiom_reports = Vec::new();
    for c in [mono, trans, conv, homog] {
        axiom_reports.push(c.static_level);
        axiom_reports.push(c.dynamic_level);
    }
    axiom_reports.push(terminal);
    let generator_reports: Vec<PropertyReport<S>> = gen.all().into_iter().cloned().collect();

    if operator_route != generator_route {
        let failing: Vec<String> = axiom_reports
            .iter()
            .chain(&generator_reports)
            .filter(|r| !r.pass)
            .map(|r| {
                format!(
                    "{} {} violation {} (witness {})",
                    r.property,
                    r.level,
                    r.max_violation,
                    r.witness.as_deref().unwrap_or("-")
                )
            })
            .collect();
        return Err(Error::RouteMismatch(format!(
            "operator route says {}, generator route says {} for {}; failing reports: [{}]",
            operator_route.class(),
            generator_route.class(),
            ge.generator().label(),
            failing.join("; ")
        )));
    }

    Ok(RiskClassification {
        monetary: operator_route.monetary,
        convex: operator_route.convex,
        coherent: operator_route.coherent,
        route: Route::OperatorTested,
        static_verdicts,
        dynamic_verdicts,
        operator_route,
        generator_route,
        static_implies_dynamic,
        axiom_reports,
        generator_reports,
    })
}
