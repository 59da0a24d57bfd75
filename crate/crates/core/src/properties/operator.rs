//! Operator-level checks on `E_g` (static) and `E_g[. | F_t]` (dynamic).
//!
//! Every instance is a linear combination of g-expectations plus a constant,
//! measured either in absolute value (identities) or by its positive part
//! (inequalities). Dynamic instances take the worst node over `t = T/4` and
//! `t = T/2`.

use rayon::prelude::*;

use super::{Instance, Level, Property, PropertyReport, LATTICE_TOL};
use crate::error::{Error, Result};
use crate::expectation::{GExpectation, Method, LSMC_SE_MULTIPLIER};
use crate::model::Claim;
use crate::scalar::Scalar;

/// Paths whose states probe LSMC regression functions in dynamic checks.
pub const LSMC_PROBE_PATHS: usize = 256;

/// Time indices of the dynamic checks: `N/4` and `N/2`.
pub fn dynamic_indices(steps: usize) -> [usize; 2] {
    [steps / 4, steps / 2]
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCheck<S> {
    pub static_level: PropertyReport<S>,
    pub dynamic_level: PropertyReport<S>,
}

impl<S: Scalar> OperatorCheck<S> {
    pub fn pass(&self) -> bool {
        self.static_level.pass && self.dynamic_level.pass
    }

    pub fn reports(&self) -> [&PropertyReport<S>; 2] {
        [&self.static_level, &self.dynamic_level]
    }
}

/// Static value, its standard error and the dynamic slices of one claim.
#[derive(Debug, Clone)]
pub(crate) struct Valuation<S> {
    pub value: S,
    pub se: S,
    pub slices: Vec<Vec<S>>,
}

pub(crate) fn valuate<S: Scalar>(ge: &GExpectation<S>, claim: &Claim<S>, times: &[usize]) -> Result<Valuation<S>> {
    match ge.method() {
        Method::Lattice(_) => {
            let sol = ge.lattice_solution(claim)?;
            let slices = times
                .iter()
                .map(|&i| sol.values(i).expect("dynamic index within grid").to_vec())
                .collect();
            Ok(Valuation {
                value: sol.y0(),
                se: S::zero(),
                slices,
            })
        }
        Method::Lsmc(_) => {
            let sol = ge.lsmc_solution(claim)?;
            let paths = ge.paths()?;
            let probes = paths.paths().min(LSMC_PROBE_PATHS);
            let mut slices = Vec::with_capacity(times.len());
            for &i in times {
                let cond = sol.conditional(i)?;
                let slice = (0..probes)
                    .map(|m| {
                        let pos = paths.positions(m);
                        let view = crate::model::PathView::new(paths.dim(), &pos);
                        let mut state = view.at(i).to_vec();
                        if sol.uses_running_max {
                            state.extend((0..view.dim()).map(|k| view.running_max(i, k)));
                        }
                        cond.eval(&state)
                    })
                    .collect::<Result<Vec<S>>>()?;
                slices.push(slice);
            }
            Ok(Valuation {
                value: sol.y0,
                se: sol.std_error,
                slices,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Measure {
    Abs,
    PositivePart,
}

/// `sum coef * E_g[pool[idx]] + offset`.
#[derive(Debug, Clone)]
pub(crate) struct Combo<S> {
    pub label: String,
    pub terms: Vec<(usize, S)>,
    pub offset: S,
    pub measure: Measure,
}

impl<S: Scalar> Combo<S> {
    fn measure(&self, v: S) -> S {
        match self.measure {
            Measure::Abs => v.abs(),
            Measure::PositivePart => v.max(S::zero()),
        }
    }

    fn static_violation(&self, vals: &[Valuation<S>]) -> S {
        let v = self
            .terms
            .iter()
            .fold(self.offset, |acc, &(k, c)| acc + c * vals[k].value);
        self.measure(v)
    }

    fn se(&self, vals: &[Valuation<S>]) -> S {
        self.terms
            .iter()
            .fold(S::zero(), |acc, &(k, c)| acc + c * c * vals[k].se * vals[k].se)
            .sqrt()
    }

    /// Worst node over all dynamic times, with its location.
    fn dynamic_violation(&self, vals: &[Valuation<S>], times: &[usize]) -> (S, usize, usize) {
        let mut worst = (S::zero(), times.first().copied().unwrap_or(0), 0);
        let mut first = true;
        for (ti, &t) in times.iter().enumerate() {
            let width = vals[self.terms[0].0].slices[ti].len();
            for j in 0..width {
                let v = self
                    .terms
                    .iter()
                    .fold(self.offset, |acc, &(k, c)| acc + c * vals[k].slices[ti][j]);
                let m = self.measure(v);
                if first || m > worst.0 {
                    worst = (m, t, j);
                    first = false;
                }
            }
        }
        worst
    }
}

/// Valuates the pool in parallel, attributing failures to the claim.
pub(crate) fn valuate_pool<S: Scalar>(
    ge: &GExpectation<S>,
    pool: &[Claim<S>],
    times: &[usize],
) -> Result<Vec<Valuation<S>>> {
    pool.par_iter()
        .map(|c| valuate(ge, c, times).map_err(|e| Error::instance(c.label(), e)))
        .collect()
}

pub(crate) fn run_combos<S: Scalar>(
    ge: &GExpectation<S>,
    property: Property,
    pool: &[Claim<S>],
    combos: &[Combo<S>],
    tol: Option<S>,
) -> Result<OperatorCheck<S>> {
    let times = dynamic_indices(ge.grid().steps());
    let vals = valuate_pool(ge, pool, &times)?;
    let tol = tol.unwrap_or_else(|| match ge.method() {
        Method::Lattice(_) => S::lit(LATTICE_TOL),
        Method::Lsmc(_) => {
            let worst = combos.iter().map(|c| c.se(&vals)).fold(S::zero(), S::max);
            S::lit(LSMC_SE_MULTIPLIER) * worst
        }
    });
    let static_instances = combos
        .iter()
        .map(|c| Instance {
            label: c.label.clone(),
            violation: c.static_violation(&vals),
        })
        .collect();
    let dynamic_instances = combos
        .iter()
        .map(|c| {
            let (v, t, j) = c.dynamic_violation(&vals, &times);
            Instance {
                label: format!("{} at t_index {t} node {j}", c.label),
                violation: v,
            }
        })
        .collect();
    Ok(OperatorCheck {
        static_level: PropertyReport::from_instances(property, Level::StaticOperator, static_instances, tol),
        dynamic_level: PropertyReport::from_instances(property, Level::DynamicOperator, dynamic_instances, tol),
    })
}

fn require_nonempty<T>(what: &str, items: &[T]) -> Result<()> {
    if items.is_empty() {
        return Err(Error::InvalidInput(format!("{what} must not be empty")));
    }
    Ok(())
}

/// `|E_g[xi + c] - E_g[xi] - c|`.
pub fn check_translation_invariance<S: Scalar>(
    ge: &GExpectation<S>,
    claims: &[Claim<S>],
    constants: &[S],
    tol: Option<S>,
) -> Result<OperatorCheck<S>> {
    require_nonempty("claims", claims)?;
    require_nonempty("constants", constants)?;
    let mut pool = claims.to_vec();
    let mut combos = Vec::new();
    for (i, xi) in claims.iter().enumerate() {
        for &c in constants {
            pool.push(xi.shifted(c));
            combos.push(Combo {
                label: format!("xi={}, c={c}", xi.label()),
                terms: vec![(pool.len() - 1, S::one()), (i, -S::one())],
                offset: -c,
                measure: Measure::Abs,
            });
        }
    }
    run_combos(ge, Property::TranslationInvariance, &pool, &combos, tol)
}

/// Positive part of `E_g[a xi + (1-a) eta] - a E_g[xi] - (1-a) E_g[eta]`.
pub fn check_convexity<S: Scalar>(
    ge: &GExpectation<S>,
    pairs: &[(Claim<S>, Claim<S>)],
    alphas: &[S],
    tol: Option<S>,
) -> Result<OperatorCheck<S>> {
    require_nonempty("claim pairs", pairs)?;
    require_nonempty("alphas", alphas)?;
    if let Some(a) = alphas.iter().find(|&&a| !(a >= S::zero() && a <= S::one())) {
        return Err(Error::InvalidInput(format!("alpha {a} outside [0, 1]")));
    }
    let mut pool = Vec::new();
    let mut combos = Vec::new();
    for (xi, eta) in pairs {
        pool.push(xi.clone());
        pool.push(eta.clone());
        let (ix, ie) = (pool.len() - 2, pool.len() - 1);
        for &a in alphas {
            pool.push(xi.mix(eta, a));
            combos.push(Combo {
                label: format!("(xi, eta)=({}, {}), alpha={a}", xi.label(), eta.label()),
                terms: vec![(pool.len() - 1, S::one()), (ix, -a), (ie, a - S::one())],
                offset: S::zero(),
                measure: Measure::PositivePart,
            });
        }
    }
    run_combos(ge, Property::Convexity, &pool, &combos, tol)
}

/// Positive part of `E_g[xi + eta] - E_g[xi] - E_g[eta]`.
pub fn check_subadditivity<S: Scalar>(
    ge: &GExpectation<S>,
    pairs: &[(Claim<S>, Claim<S>)],
    tol: Option<S>,
) -> Result<OperatorCheck<S>> {
    require_nonempty("claim pairs", pairs)?;
    let mut pool = Vec::new();
    let mut combos = Vec::new();
    for (xi, eta) in pairs {
        pool.push(xi.clone());
        pool.push(eta.clone());
        pool.push(xi.plus(eta));
        let k = pool.len();
        combos.push(Combo {
            label: format!("(xi, eta)=({}, {})", xi.label(), eta.label()),
            terms: vec![(k - 1, S::one()), (k - 3, -S::one()), (k - 2, -S::one())],
            offset: S::zero(),
            measure: Measure::PositivePart,
        });
    }
    run_combos(ge, Property::Subadditivity, &pool, &combos, tol)
}

/// `|E_g[l xi] - l E_g[xi]|` for `l >= 0`.
pub fn check_positive_homogeneity<S: Scalar>(
    ge: &GExpectation<S>,
    claims: &[Claim<S>],
    lambdas: &[S],
    tol: Option<S>,
) -> Result<OperatorCheck<S>> {
    require_nonempty("claims", claims)?;
    require_nonempty("lambdas", lambdas)?;
    if let Some(l) = lambdas.iter().find(|&&l| !(l >= S::zero())) {
        return Err(Error::InvalidInput(format!("lambda {l} is negative")));
    }
    let mut pool = claims.to_vec();
    let mut combos = Vec::new();
    for (i, xi) in claims.iter().enumerate() {
        for &l in lambdas {
            pool.push(xi.scaled(l));
            combos.push(Combo {
                label: format!("xi={}, lambda={l}", xi.label()),
                terms: vec![(pool.len() - 1, S::one()), (i, -l)],
                offset: S::zero(),
                measure: Measure::Abs,
            });
        }
    }
    run_combos(ge, Property::PositiveHomogeneity, &pool, &combos, tol)
}

/// Positive part of `E_g[lo] - E_g[hi]` for pairs with `lo <= hi` pointwise.
pub fn check_monotonicity<S: Scalar>(
    ge: &GExpectation<S>,
    ordered_pairs: &[(Claim<S>, Claim<S>)],
    tol: Option<S>,
) -> Result<OperatorCheck<S>> {
    require_nonempty("claim pairs", ordered_pairs)?;
    let mut pool = Vec::new();
    let mut combos = Vec::new();
    for (lo, hi) in ordered_pairs {
        pool.push(lo.clone());
        pool.push(hi.clone());
        let k = pool.len();
        combos.push(Combo {
            label: format!("({} <= {})", lo.label(), hi.label()),
            terms: vec![(k - 2, S::one()), (k - 1, -S::one())],
            offset: S::zero(),
            measure: Measure::PositivePart,
        });
    }
    run_combos(ge, Property::Monotonicity, &pool, &combos, tol)
}

/// `|E_g[c] - c|`.
pub fn check_constant_preservation<S: Scalar>(
    ge: &GExpectation<S>,
    constants: &[S],
    tol: Option<S>,
) -> Result<OperatorCheck<S>> {
    require_nonempty("constants", constants)?;
    let dim = ge.generator().dim();
    let pool: Vec<Claim<S>> = constants.iter().map(|&c| Claim::constant(dim, c)).collect();
    let combos: Vec<Combo<S>> = constants
        .iter()
        .enumerate()
        .map(|(i, &c)| Combo {
            label: format!("c={c}"),
            terms: vec![(i, S::one())],
            offset: -c,
            measure: Measure::Abs,
        })
        .collect();
    run_combos(ge, Property::ConstantPreservation, &pool, &combos, tol)
}
