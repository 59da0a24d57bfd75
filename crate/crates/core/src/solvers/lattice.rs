//! Recombining random-walk lattice for one-dimensional BSDEs.
//!
//! Node `j` at level `i` sits at `x = (2j - i) * sqrt(dt)`. Each step averages
//! the two children for the conditional mean and takes their scaled
//! difference as `Z`; the driver is then applied explicitly or implicitly.

use crate::error::{Error, Result};
use crate::model::{Claim, GeneratorSpec, TimeGrid};
use crate::scalar::Scalar;

/// Maximum fixed-point sweeps for the implicit scheme.
pub const MAX_FIXED_POINT_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LatticeScheme {
    /// `v = ybar + g(t, v, Z) dt`, solved by fixed-point iteration.
    #[default]
    Implicit,
    /// `v = ybar + g(t, ybar, Z) dt`.
    Explicit,
}

/// Time at which the driver is sampled inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepTime {
    /// `t_i`.
    #[default]
    Left,
    /// `t_i + dt / 2`; integrates drivers affine in `t` exactly.
    Midpoint,
}

/// Full backward-induction output.
#[derive(Debug, Clone)]
pub struct LatticeSolution<S> {
    grid: TimeGrid<S>,
    time_origin: S,
    values: Vec<Vec<S>>,
    z: Vec<Vec<S>>,
    max_iterations: usize,
}

impl<S: Scalar> LatticeSolution<S> {
    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn time_origin(&self) -> S {
        self.time_origin
    }

    pub fn y0(&self) -> S {
        self.values[0][0]
    }

    /// `Y[i][.]`, or `None` past the horizon.
    pub fn values(&self, i: usize) -> Option<&[S]> {
        self.values.get(i).map(Vec::as_slice)
    }

    /// `Z[i][.]` for `i < N`.
    pub fn z(&self, i: usize) -> Option<&[S]> {
        self.z.get(i).map(Vec::as_slice)
    }

    pub fn state(&self, i: usize, j: usize) -> S {
        node_state(self.grid.dt(), i, j)
    }

    pub fn states(&self, i: usize) -> Vec<S> {
        (0..=i).map(|j| self.state(i, j)).collect()
    }

    /// Probability of reaching node `(i, j)`: `C(i, j) / 2^i`.
    pub fn node_weights(&self, i: usize) -> Vec<S> {
        node_weights(i)
    }

    /// Largest fixed-point iteration count used at any node.
    pub fn max_fixed_point_iterations(&self) -> usize {
        self.max_iterations
    }
}

pub(crate) fn node_state<S: Scalar>(dt: S, i: usize, j: usize) -> S {
    let k = 2 * j as i64 - i as i64;
    S::lit(k as f64) * dt.sqrt()
}

/// Binomial weights at level `i`, computed in log space to stay finite for large `i`.
pub(crate) fn node_weights<S: Scalar>(i: usize) -> Vec<S> {
    let mut log_fact = vec![0.0_f64; i + 1];
    for k in 1..=i {
        log_fact[k] = log_fact[k - 1] + (k as f64).ln();
    }
    let ln2 = std::f64::consts::LN_2;
    (0..=i)
        .map(|j| S::lit((log_fact[i] - log_fact[j] - log_fact[i - j] - i as f64 * ln2).exp()))
        .collect()
}

/// Configurable lattice solver bound to one generator and grid.
#[derive(Debug, Clone)]
pub struct LatticeSolver<'g, S> {
    g: &'g GeneratorSpec<S>,
    grid: TimeGrid<S>,
    scheme: LatticeScheme,
    step_time: StepTime,
    time_origin: S,
}

impl<'g, S: Scalar> LatticeSolver<'g, S> {
    /// Refuses `d != 1` and grids with `K * dt > 0.5`.
    pub fn new(g: &'g GeneratorSpec<S>, grid: TimeGrid<S>) -> Result<Self> {
        if g.dim() != 1 {
            return Err(Error::InvalidInput(format!(
                "lattice solver needs a one-dimensional generator, got d = {}",
                g.dim()
            )));
        }
        let k_dt = g.lipschitz() * grid.dt();
        if k_dt > S::lit(0.5) {
            let required = (S::lit(2.0) * g.lipschitz() * grid.horizon()).ceil();
            return Err(Error::StepTooLarge {
                k_dt: k_dt.to_f64_lossy(),
                required_steps: required.to_usize().unwrap_or(usize::MAX),
            });
        }
        Ok(Self {
            g,
            grid,
            scheme: LatticeScheme::default(),
            step_time: StepTime::default(),
            time_origin: S::zero(),
        })
    }

    pub fn scheme(mut self, scheme: LatticeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn step_time(mut self, step_time: StepTime) -> Self {
        self.step_time = step_time;
        self
    }

    /// Shifts the driver clock: level `i` runs at `t0 + t_i`.
    pub fn time_origin(mut self, t0: S) -> Self {
        self.time_origin = t0;
        self
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    /// Terminal payoff on the `N + 1` terminal nodes.
    pub fn terminal_values(&self, claim: &Claim<S>) -> Result<Vec<S>> {
        if claim.dim() != 1 || !claim.is_terminal() {
            return Err(Error::InvalidInput(format!(
                "lattice solver needs a one-dimensional terminal claim, got {:?}",
                claim
            )));
        }
        let n = self.grid.steps();
        let dt = self.grid.dt();
        (0..=n)
            .map(|j| {
                let x = node_state(dt, n, j);
                claim
                    .eval_terminal(&[x])
                    .map_err(|e| Error::eval(format!("claim {} at B_T = {x}", claim.label()), e))
            })
            .collect()
    }

    pub fn solve(&self, claim: &Claim<S>) -> Result<LatticeSolution<S>> {
        let terminal = self.terminal_values(claim)?;
        self.solve_values(terminal)
    }

    /// Backward induction from explicit terminal node values.
    pub fn solve_values(&self, terminal: Vec<S>) -> Result<LatticeSolution<S>> {
        let n = self.grid.steps();
        if terminal.len() != n + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} terminal values, got {}",
                n + 1,
                terminal.len()
            )));
        }
        if let Some(j) = terminal.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                at: format!("terminal node {j}"),
            });
        }
        let mut values = vec![Vec::new(); n + 1];
        let mut z = vec![Vec::new(); n];
        values[n] = terminal;
        let mut max_iterations = 0;
        for i in (0..n).rev() {
            let (y, zi, iters) = self.step(i, &values[i + 1])?;
            max_iterations = max_iterations.max(iters);
            values[i] = y;
            z[i] = zi;
        }
        Ok(LatticeSolution {
            grid: self.grid,
            time_origin: self.time_origin,
            values,
            z,
            max_iterations,
        })
    }

    /// Rolls a window of node values from level `from` back to level `to`.
    ///
    /// `window` holds consecutive nodes at level `from`; the result has
    /// `window.len() - (from - to)` nodes. Used for sub-lattices rooted at an
    /// interior node, which follow the same arithmetic as the full lattice.
    pub fn roll_back(&self, mut window: Vec<S>, from: usize, to: usize) -> Result<Vec<S>> {
        if to > from || from > self.grid.steps() || window.len() <= from - to {
            return Err(Error::InvalidInput(format!(
                "cannot roll {} values from level {from} to {to}",
                window.len()
            )));
        }
        for i in (to..from).rev() {
            window = self.step(i, &window)?.0;
        }
        Ok(window)
    }

    fn driver_time(&self, i: usize) -> S {
        let t = self.time_origin + self.grid.time(i);
        match self.step_time {
            StepTime::Left => t,
            StepTime::Midpoint => t + self.grid.dt() / S::lit(2.0),
        }
    }

    /// One backward step from `next` (level `i + 1`) to level `i`.
    fn step(&self, i: usize, next: &[S]) -> Result<(Vec<S>, Vec<S>, usize)> {
        let dt = self.grid.dt();
        let two_sqrt_dt = S::lit(2.0) * dt.sqrt();
        let half = S::lit(0.5);
        let t = self.driver_time(i);
        let width = next.len() - 1;
        let mut y = Vec::with_capacity(width);
        let mut z = Vec::with_capacity(width);
        let mut max_iters = 0;
        let mut zbuf = [S::zero()];
        for j in 0..width {
            let (down, up) = (next[j], next[j + 1]);
            let ybar = (up + down) * half;
            let zj = (up - down) / two_sqrt_dt;
            zbuf[0] = zj;
            let at = || format!("node ({i}, {j})");
            let v = match self.scheme {
                LatticeScheme::Explicit => {
                    let g = self.g.eval(t, ybar, &zbuf).map_err(|e| Error::eval(at(), e))?;
                    ybar + g * dt
                }
                LatticeScheme::Implicit => {
                    let mut v = ybar;
                    let mut converged = false;
                    let mut delta = S::zero();
                    for k in 1..=MAX_FIXED_POINT_ITERATIONS {
                        let g = self.g.eval(t, v, &zbuf).map_err(|e| Error::eval(at(), e))?;
                        let next_v = ybar + g * dt;
                        delta = (next_v - v).abs();
                        v = next_v;
                        if delta <= S::fixed_point_tol(v) {
                            max_iters = max_iters.max(k);
                            converged = true;
                            break;
                        }
                    }
                    if !converged {
                        return Err(Error::NonConvergence {
                            at: at(),
                            iterations: MAX_FIXED_POINT_ITERATIONS,
                            last_delta: delta.to_f64_lossy(),
                        });
                    }
                    v
                }
            };
            if !v.is_finite() {
                return Err(Error::NonFinite { at: at() });
            }
            y.push(v);
            z.push(zj);
        }
        Ok((y, z, max_iters))
    }
}

/// Solves the BSDE for a one-dimensional terminal claim on the lattice.
pub fn solve_lattice<S: Scalar>(
    g: &GeneratorSpec<S>,
    claim: &Claim<S>,
    grid: TimeGrid<S>,
    scheme: LatticeScheme,
) -> Result<LatticeSolution<S>> {
    LatticeSolver::new(g, grid)?.scheme(scheme).solve(claim)
}

/// `Y[i][.]`: the lattice form of the conditional g-expectation at `t_i`.
pub fn conditional_slice<S: Scalar>(sol: &LatticeSolution<S>, i: usize) -> Result<&[S]> {
    sol.values(i).ok_or(Error::IndexOutOfRange {
        index: i,
        max: sol.grid().steps(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs_z(k: f64) -> GeneratorSpec<f64> {
        GeneratorSpec::from_fn(1, k.abs(), format!("{k}|z|"), move |_, _, z| k * z[0].abs())
    }

    fn zero() -> GeneratorSpec<f64> {
        GeneratorSpec::from_fn(1, 0.0, "0", |_, _, _| 0.0)
    }

    fn id() -> Claim<f64> {
        Claim::scalar_fn("x", |x| x)
    }

    #[test]
    fn abs_z_linear_claim_is_exact_for_any_n() {
        for n in [1, 2, 7, 64, 256] {
            let grid = TimeGrid::new(1.0, n).unwrap();
            let sol = solve_lattice(&abs_z(0.3), &id(), grid, LatticeScheme::Implicit).unwrap();
            assert!((sol.y0() - 0.3).abs() <= 1e-13, "N={n}: {}", sol.y0());
            for i in 0..n {
                for &zij in sol.z(i).unwrap() {
                    assert!((zij - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn squared_claim_under_zero_driver_gives_horizon() {
        for n in [1, 3, 50, 256] {
            let grid = TimeGrid::new(1.0, n).unwrap();
            let sol = solve_lattice(&zero(), &Claim::scalar_fn("x^2", |x| x * x), grid, LatticeScheme::Implicit)
                .unwrap();
            assert!((sol.y0() - 1.0).abs() <= 1e-12, "N={n}: {}", sol.y0());
        }
    }

    #[test]
    fn constant_driver_integrates() {
        let g = GeneratorSpec::from_fn(1, 0.0_f64, "c", |_, _, _| 0.7);
        let grid = TimeGrid::new(2.0, 40).unwrap();
        let sol = solve_lattice(&g, &Claim::constant(1, 0.0), grid, LatticeScheme::Explicit).unwrap();
        assert!((sol.y0() - 1.4).abs() < 1e-13);
    }

    #[test]
    fn slices() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let sol = solve_lattice(&zero(), &id(), grid, LatticeScheme::Implicit).unwrap();
        assert_eq!(conditional_slice(&sol, 0).unwrap().len(), 1);
        let terminal = conditional_slice(&sol, 16).unwrap();
        assert_eq!(terminal, sol.states(16).as_slice());
        for i in 0..=16 {
            let slice = conditional_slice(&sol, i).unwrap();
            for (v, x) in slice.iter().zip(sol.states(i)) {
                assert!((v - x).abs() < 1e-14);
            }
        }
        assert!(matches!(
            conditional_slice(&sol, 17),
            Err(Error::IndexOutOfRange { index: 17, max: 16 })
        ));
    }

    #[test]
    fn refuses_large_steps_naming_required_n() {
        let g = abs_z(3.0);
        let err = LatticeSolver::new(&g, TimeGrid::new(1.0, 4).unwrap()).unwrap_err();
        match err {
            Error::StepTooLarge { required_steps, .. } => assert_eq!(required_steps, 6),
            other => panic!("{other:?}"),
        }
        assert!(LatticeSolver::new(&g, TimeGrid::new(1.0, 6).unwrap()).is_ok());
    }

    #[test]
    fn rejects_multidimensional_inputs() {
        let g2 = GeneratorSpec::from_fn(2, 0.0, "0", |_, _, _| 0.0_f64);
        assert!(LatticeSolver::new(&g2, TimeGrid::new(1.0, 4).unwrap()).is_err());
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let path = Claim::path(1, "p", false, |p: &crate::model::PathView<'_, f64>| Ok(p.terminal()[0]));
        assert!(solve_lattice(&zero(), &path, grid, LatticeScheme::Implicit).is_err());
    }

    #[test]
    fn non_convergent_fixed_point_reports_node() {
        // Declared K understates the true slope: v = ybar + 40 v dt diverges.
        let g = GeneratorSpec::from_fn(1, 0.1, "40y", |_, y: f64, _| 40.0 * y);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let err = solve_lattice(&g, &Claim::constant(1, 1.0), grid, LatticeScheme::Implicit).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. } | Error::Eval { .. }), "{err}");
    }

    #[test]
    fn roll_back_matches_full_solution_on_subtree() {
        let g = GeneratorSpec::from_fn(1, 1.0, "sin", |_, y: f64, z: &[f64]| y.sin() * z[0].abs().min(1.0));
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let solver = LatticeSolver::new(&g, grid).unwrap();
        let claim = Claim::scalar_fn("call", |x: f64| (x - 0.5).max(0.0));
        let sol = solver.solve(&claim).unwrap();
        let terminal = sol.values(32).unwrap();
        let (i, j) = (8, 3);
        let window = terminal[j..=j + (32 - i)].to_vec();
        let root = solver.roll_back(window, 32, i).unwrap();
        assert_eq!(root, vec![sol.values(i).unwrap()[j]]);
    }

    #[test]
    fn node_weights_sum_to_one() {
        let w: Vec<f64> = node_weights(200);
        let s: f64 = w.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(node_weights::<f64>(2), vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn runs_in_single_precision() {
        let g = GeneratorSpec::from_fn(1, 0.3_f32, "0.3|z|", |_, _, z: &[f32]| 0.3 * z[0].abs());
        let grid = TimeGrid::new(1.0_f32, 64).unwrap();
        let sol = solve_lattice(&g, &Claim::scalar_fn("x", |x: f32| x), grid, LatticeScheme::Implicit).unwrap();
        assert!((sol.y0() - 0.3).abs() < 1e-4);
    }
}
