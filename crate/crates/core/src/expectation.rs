//! The operators `E_g[xi]` and `E_g[xi | F_t]` on top of the solvers.
//!
//! A [`GExpectation`] binds a driver, a grid and a method, validates the
//! driver once, and then evaluates any number of claims.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, EvalError, Result};
use crate::model::{validate_assumptions, AssumptionReport, Claim, GeneratorSpec, SampleBox, TimeGrid};
use crate::scalar::Scalar;
use crate::solvers::{
    simulate_paths, solve_lsmc_with, LatticeScheme, LatticeSolution, LatticeSolver, LsmcOptions, LsmcSolution,
    PathBundle,
};

pub const ASSUMPTION_SAMPLES: usize = 100_000;
pub const ASSUMPTION_TOL: f64 = 1e-9;
pub const ASSUMPTION_SEED: u64 = 0;
/// Default tolerance for lattice identities.
pub const LATTICE_TOL: f64 = 1e-10;
/// Default LSMC tolerance in units of the combined standard error.
pub const LSMC_SE_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LsmcConfig {
    pub paths: usize,
    pub degree: usize,
    pub picard_iters: usize,
    pub seed: u64,
}

impl Default for LsmcConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            degree: 3,
            picard_iters: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lattice(LatticeScheme),
    Lsmc(LsmcConfig),
}

impl Default for Method {
    fn default() -> Self {
        Method::Lattice(LatticeScheme::Implicit)
    }
}

impl Method {
    pub fn kind(&self) -> MethodKind {
        match self {
            Method::Lattice(_) => MethodKind::Lattice,
            Method::Lsmc(_) => MethodKind::Lsmc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Lattice,
    Lsmc,
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MethodKind::Lattice => "lattice",
            MethodKind::Lsmc => "lsmc",
        })
    }
}

/// How a failed `g(t, y, 0) = 0` check is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Refuse drivers that fail the check.
    #[default]
    Strict,
    /// Solve the plain BSDE anyway and record a warning.
    RawBsde,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub warnings: Vec<String>,
    pub max_fixed_point_iterations: Option<usize>,
    /// LSMC steps whose regression needed the ridge fallback.
    pub ridge_steps: Vec<usize>,
    pub paths_used: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GExpectationResult<S> {
    pub value: S,
    pub method: MethodKind,
    /// 0 on the lattice, the standard error for LSMC.
    pub error_estimate: S,
    pub diagnostics: Diagnostics,
}

/// Discrete `E_g[xi | F_{t_i}]`.
#[derive(Debug, Clone)]
pub enum ConditionalRepresentation<S> {
    /// Node values at level `t_index`, with node states in increasing order.
    Lattice {
        t_index: usize,
        states: Vec<S>,
        values: Vec<S>,
    },
    /// Regression function of the state at step `t_index`; the claim itself at the horizon.
    Lsmc {
        t_index: usize,
        solution: Arc<LsmcSolution<S>>,
        claim: Claim<S>,
    },
}

impl<S: Scalar> ConditionalRepresentation<S> {
    pub fn t_index(&self) -> usize {
        match self {
            Self::Lattice { t_index, .. } | Self::Lsmc { t_index, .. } => *t_index,
        }
    }

    /// Value at `state`. Lattice slices interpolate linearly between nodes and
    /// reject states outside the node range; LSMC states carry running maxima
    /// after the positions when the claim uses them.
    pub fn eval(&self, state: &[S]) -> Result<S> {
        match self {
            Self::Lattice { states, values, .. } => {
                let x = *state
                    .first()
                    .ok_or_else(|| Error::InvalidInput("empty state".into()))?;
                let last = states.len() - 1;
                if states.len() == 1 {
                    return Ok(values[0]);
                }
                if x < states[0] || x > states[last] {
                    return Err(Error::InvalidInput(format!(
                        "state {x} outside node range [{}, {}]",
                        states[0], states[last]
                    )));
                }
                let j = states.partition_point(|&s| s <= x).clamp(1, last);
                let w = (x - states[j - 1]) / (states[j] - states[j - 1]);
                Ok(values[j - 1] + w * (values[j] - values[j - 1]))
            }
            Self::Lsmc {
                t_index,
                solution,
                claim,
            } => {
                if *t_index == solution.steps.len() {
                    let d = claim.dim();
                    return claim
                        .eval_terminal(&state[..d.min(state.len())])
                        .map_err(|e| Error::eval(format!("claim {}", claim.label()), e));
                }
                solution.conditional(*t_index)?.eval(state)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerCheck<S> {
    /// `E_g[E_g[xi | F_t]]` computed on `[0, t]`.
    pub lhs: S,
    /// `E_g[xi]`.
    pub rhs: S,
    pub diff: S,
    pub tol: S,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorCheck<S> {
    /// Level-`t` slice of the solution with terminal claim `1_A xi`.
    pub lhs: Vec<S>,
    /// `1_A E_g[xi | F_t]`.
    pub rhs: Vec<S>,
    pub max_diff: S,
    pub tol: S,
    pub pass: bool,
    pub diagnostic: Option<String>,
}

/// A validated driver bound to a grid and a solution method.
#[derive(Debug)]
pub struct GExpectation<S> {
    g: GeneratorSpec<S>,
    grid: TimeGrid<S>,
    method: Method,
    mode: Mode,
    assumptions: AssumptionReport<S>,
    warnings: Vec<String>,
    paths: OnceLock<Arc<PathBundle<S>>>,
}

impl<S: Scalar> GExpectation<S> {
    /// Validates `g` on the standard sampling box.
    pub fn new(g: GeneratorSpec<S>, grid: TimeGrid<S>, method: Method, mode: Mode) -> Result<Self> {
        let report = validate_assumptions(
            &g,
            &SampleBox::standard(grid.horizon()),
            ASSUMPTION_SAMPLES,
            S::lit(ASSUMPTION_TOL),
            ASSUMPTION_SEED,
        )?;
        Self::with_report(g, grid, method, mode, report)
    }

    /// Uses an existing assumption report instead of sampling again.
    pub fn with_report(
        g: GeneratorSpec<S>,
        grid: TimeGrid<S>,
        method: Method,
        mode: Mode,
        report: AssumptionReport<S>,
    ) -> Result<Self> {
        if !report.a1_pass {
            return Err(Error::Assumption {
                assumption: "A1",
                detail: format!(
                    "sampled Lipschitz quotient {} exceeds declared K = {} for {}",
                    report.a1_max_quotient,
                    g.lipschitz(),
                    g.label()
                ),
            });
        }
        let mut warnings = Vec::new();
        if !report.a3_pass {
            let detail = format!("max |g(t, y, 0)| = {} for {}", report.a3_max_abs, g.label());
            match mode {
                Mode::Strict => {
                    return Err(Error::Assumption {
                        assumption: "A3",
                        detail,
                    })
                }
                Mode::RawBsde => warnings.push(format!("g(t, y, 0) != 0: {detail}")),
            }
        }
        if let Method::Lsmc(cfg) = method {
            if cfg.paths < 2 || cfg.degree == 0 || cfg.picard_iters == 0 {
                return Err(Error::InvalidInput(format!(
                    "LSMC needs paths >= 2, degree >= 1, picard_iters >= 1; got {cfg:?}"
                )));
            }
        }
        Ok(Self {
            g,
            grid,
            method,
            mode,
            assumptions: report,
            warnings,
            paths: OnceLock::new(),
        })
    }

    pub fn generator(&self) -> &GeneratorSpec<S> {
        &self.g
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn assumptions(&self) -> &AssumptionReport<S> {
        &self.assumptions
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Default tolerance for identities between results carrying the given standard errors.
    pub fn default_tol(&self, standard_errors: &[S]) -> S {
        match self.method {
            Method::Lattice(_) => S::lit(LATTICE_TOL),
            Method::Lsmc(_) => {
                let var = standard_errors.iter().fold(S::zero(), |acc, &s| acc + s * s);
                S::lit(LSMC_SE_MULTIPLIER) * var.sqrt()
            }
        }
    }

    pub fn lattice_solver(&self) -> Result<LatticeSolver<'_, S>> {
        match self.method {
            Method::Lattice(scheme) => Ok(LatticeSolver::new(&self.g, self.grid)?.scheme(scheme)),
            Method::Lsmc(_) => Err(Error::InvalidInput("operation needs the lattice method".into())),
        }
    }

    /// The simulated bundle, drawn on first use and shared afterwards.
    pub fn paths(&self) -> Result<Arc<PathBundle<S>>> {
        let Method::Lsmc(cfg) = self.method else {
            return Err(Error::InvalidInput("operation needs the LSMC method".into()));
        };
        if let Some(p) = self.paths.get() {
            return Ok(Arc::clone(p));
        }
        let bundle = Arc::new(simulate_paths(self.g.dim(), self.grid, cfg.paths, cfg.seed)?);
        Ok(Arc::clone(self.paths.get_or_init(|| bundle)))
    }

    fn lsmc_config(&self) -> Result<LsmcConfig> {
        match self.method {
            Method::Lsmc(cfg) => Ok(cfg),
            Method::Lattice(_) => Err(Error::InvalidInput("operation needs the LSMC method".into())),
        }
    }

    pub fn lattice_solution(&self, claim: &Claim<S>) -> Result<LatticeSolution<S>> {
        self.lattice_solver()?.solve(claim)
    }

    pub fn lsmc_solution(&self, claim: &Claim<S>) -> Result<LsmcSolution<S>> {
        let cfg = self.lsmc_config()?;
        let paths = self.paths()?;
        solve_lsmc_with(&self.g, claim, &paths, &LsmcOptions::new(cfg.degree, cfg.picard_iters))
    }

    pub fn evaluate(&self, claim: &Claim<S>) -> Result<GExpectationResult<S>> {
        let mut diagnostics = Diagnostics {
            warnings: self.warnings.clone(),
            ..Diagnostics::default()
        };
        match self.method {
            Method::Lattice(_) => {
                let sol = self.lattice_solution(claim)?;
                diagnostics.max_fixed_point_iterations = Some(sol.max_fixed_point_iterations());
                Ok(GExpectationResult {
                    value: sol.y0(),
                    method: MethodKind::Lattice,
                    error_estimate: S::zero(),
                    diagnostics,
                })
            }
            Method::Lsmc(_) => {
                let sol = self.lsmc_solution(claim)?;
                diagnostics.ridge_steps = sol.ridge_steps();
                diagnostics.paths_used = Some(sol.paths_used);
                Ok(GExpectationResult {
                    value: sol.y0,
                    method: MethodKind::Lsmc,
                    error_estimate: sol.std_error,
                    diagnostics,
                })
            }
        }
    }

    pub fn conditional(&self, claim: &Claim<S>, t_index: usize) -> Result<ConditionalRepresentation<S>> {
        let n = self.grid.steps();
        if t_index > n {
            return Err(Error::IndexOutOfRange { index: t_index, max: n });
        }
        match self.method {
            Method::Lattice(_) => {
                let sol = self.lattice_solution(claim)?;
                Ok(ConditionalRepresentation::Lattice {
                    t_index,
                    states: sol.states(t_index),
                    values: sol.values(t_index).expect("index checked").to_vec(),
                })
            }
            Method::Lsmc(_) => Ok(ConditionalRepresentation::Lsmc {
                t_index,
                solution: Arc::new(self.lsmc_solution(claim)?),
                claim: claim.clone(),
            }),
        }
    }

    /// Compares `E_g[eta]` on `[0, t]`, with `eta = E_g[xi | F_t]`, against `E_g[xi]`.
    pub fn tower_check(&self, claim: &Claim<S>, t_index: usize, tol: Option<S>) -> Result<TowerCheck<S>> {
        let n = self.grid.steps();
        if t_index > n {
            return Err(Error::IndexOutOfRange { index: t_index, max: n });
        }
        let (lhs, rhs, ses) = match self.method {
            Method::Lattice(_) => {
                let solver = self.lattice_solver()?;
                let sol = solver.solve(claim)?;
                let eta = sol.values(t_index).expect("index checked").to_vec();
                let lhs = solver.roll_back(eta, t_index, 0)?[0];
                (lhs, sol.y0(), vec![])
            }
            Method::Lsmc(_) => {
                let full = Arc::new(self.lsmc_solution(claim)?);
                if t_index == 0 || t_index == n {
                    (full.y0, full.y0, vec![full.std_error])
                } else {
                    let (lhs, se) = self.lsmc_nested(&full, claim, t_index)?;
                    (lhs, full.y0, vec![se, full.std_error])
                }
            }
        };
        let tol = tol.unwrap_or_else(|| self.default_tol(&ses));
        let diff = (lhs - rhs).abs();
        Ok(TowerCheck {
            lhs,
            rhs,
            diff,
            tol,
            pass: diff <= tol,
        })
    }

    fn lsmc_nested(&self, full: &Arc<LsmcSolution<S>>, claim: &Claim<S>, t_index: usize) -> Result<(S, S)> {
        let cfg = self.lsmc_config()?;
        let truncated = self.paths()?.truncated(t_index)?;
        let d = claim.dim();
        let rm = full.uses_running_max;
        let sol = Arc::clone(full);
        let eta = Claim::path(d, format!("E_g[{} | F_t]", claim.label()), rm, move |view| {
            let last = view.len() - 1;
            let mut state = view.at(last).to_vec();
            if rm {
                state.extend((0..view.dim()).map(|k| view.running_max(last, k)));
            }
            sol.conditional(t_index)
                .and_then(|c| c.eval(&state))
                .map_err(|e| EvalError::NonFinite {
                    what: e.to_string(),
                    value: f64::NAN,
                })
        });
        let nested = solve_lsmc_with(
            &self.g,
            &eta,
            &truncated,
            &LsmcOptions::new(cfg.degree, cfg.picard_iters),
        )?;
        Ok((nested.y0, nested.std_error))
    }

    /// Checks `E_g[1_A xi | F_t] = 1_A E_g[xi | F_t]` for a set `A` of level-`t` nodes.
    ///
    /// Every path through node `(t, j)` stays in the subtree below it, so the
    /// left side at that node is the subtree solution for `xi` when `j` is in
    /// `A` and for the zero claim otherwise.
    pub fn indicator_factorization_check(
        &self,
        claim: &Claim<S>,
        t_index: usize,
        nodes: &[usize],
        tol: Option<S>,
    ) -> Result<IndicatorCheck<S>> {
        let solver = self.lattice_solver()?;
        let n = self.grid.steps();
        if t_index > n {
            return Err(Error::IndexOutOfRange { index: t_index, max: n });
        }
        let mut in_a = vec![false; t_index + 1];
        for &j in nodes {
            if j > t_index {
                return Err(Error::InvalidInput(format!("node {j} does not exist at level {t_index}")));
            }
            in_a[j] = true;
        }
        let tol = tol.unwrap_or_else(|| S::lit(LATTICE_TOL));
        if nodes.is_empty() {
            let zeros = vec![S::zero(); t_index + 1];
            return Ok(IndicatorCheck {
                lhs: zeros.clone(),
                rhs: zeros,
                max_diff: S::zero(),
                tol,
                pass: true,
                diagnostic: Some("empty event: both sides vanish".into()),
            });
        }
        let terminal = solver.terminal_values(claim)?;
        let full = solver.solve_values(terminal.clone())?;
        let slice = full.values(t_index).expect("index checked");
        let width = n - t_index;
        let lhs = (0..=t_index)
            .map(|j| {
                let window = if in_a[j] {
                    terminal[j..=j + width].to_vec()
                } else {
                    vec![S::zero(); width + 1]
                };
                Ok(solver.roll_back(window, n, t_index)?[0])
            })
            .collect::<Result<Vec<S>>>()?;
        let rhs: Vec<S> = slice
            .iter()
            .zip(&in_a)
            .map(|(&v, &a)| if a { v } else { S::zero() })
            .collect();
        let max_diff = lhs
            .iter()
            .zip(&rhs)
            .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        Ok(IndicatorCheck {
            lhs,
            rhs,
            max_diff,
            tol,
            pass: max_diff <= tol,
            diagnostic: None,
        })
    }
}

/// Level-`t_index` node indices whose state satisfies `pred`.
pub fn nodes_where<S: Scalar>(grid: &TimeGrid<S>, t_index: usize, pred: impl Fn(S) -> bool) -> Vec<usize> {
    (0..=t_index)
        .filter(|&j| pred(crate::solvers::lattice::node_state(grid.dt(), t_index, j)))
        .collect()
}

pub fn g_expectation<S: Scalar>(
    g: &GeneratorSpec<S>,
    claim: &Claim<S>,
    grid: TimeGrid<S>,
    method: Method,
) -> Result<GExpectationResult<S>> {
    GExpectation::new(g.clone(), grid, method, Mode::Strict)?.evaluate(claim)
}

pub fn conditional_g_expectation<S: Scalar>(
    g: &GeneratorSpec<S>,
    claim: &Claim<S>,
    grid: TimeGrid<S>,
    t_index: usize,
    method: Method,
) -> Result<ConditionalRepresentation<S>> {
    GExpectation::new(g.clone(), grid, method, Mode::Strict)?.conditional(claim, t_index)
}

pub fn tower_check<S: Scalar>(
    g: &GeneratorSpec<S>,
    claim: &Claim<S>,
    grid: TimeGrid<S>,
    t_index: usize,
    method: Method,
    tol: Option<S>,
) -> Result<TowerCheck<S>> {
    GExpectation::new(g.clone(), grid, method, Mode::Strict)?.tower_check(claim, t_index, tol)
}

pub fn indicator_factorization_check<S: Scalar>(
    g: &GeneratorSpec<S>,
    claim: &Claim<S>,
    grid: TimeGrid<S>,
    t_index: usize,
    nodes: &[usize],
    tol: Option<S>,
) -> Result<IndicatorCheck<S>> {
    GExpectation::new(g.clone(), grid, Method::default(), Mode::Strict)?
        .indicator_factorization_check(claim, t_index, nodes, tol)
}
