//! Least-squares Monte Carlo backward induction.
//!
//! At each step the pathwise value `Y_{i+1} = xi + sum_{k > i} g(t_k, Y_k, Z_k) dt`
//! and `Y_{i+1} * Delta B_i / dt` (the `Z` estimate) are regressed on a
//! polynomial basis of the Markov state `B_{t_i}` (plus running maxima when
//! the claim asks for them). `Y_i` then solves `Y = mean + g(t_i, Y, Z) dt` by
//! a fixed number of Picard sweeps. Regressing the pathwise sum rather than
//! the previous fit keeps projection errors from compounding across steps.

use rayon::prelude::*;

use super::paths::PathBundle;
use super::regression::{dot, least_squares, Basis};
use crate::error::{Error, Result};
use crate::model::{Claim, GeneratorSpec, PathView};
use crate::scalar::{mean_and_sd, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsmcOptions<S> {
    pub degree: usize,
    pub picard_iters: usize,
    /// Driver clock offset: step `i` runs at `t0 + t_i`.
    pub time_origin: S,
}

impl<S: Scalar> LsmcOptions<S> {
    pub fn new(degree: usize, picard_iters: usize) -> Self {
        Self {
            degree,
            picard_iters,
            time_origin: S::zero(),
        }
    }
}

/// Regression output for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFit<S> {
    /// Driver time at this step.
    pub time: S,
    /// Standardization applied to the state before the basis (`sqrt(t_i)`, or 1 at `t = 0`).
    pub scale: S,
    pub mean: Vec<S>,
    /// One coefficient vector per Brownian coordinate.
    pub z: Vec<Vec<S>>,
    pub ridge_used: bool,
}

#[derive(Debug, Clone)]
pub struct LsmcSolution<S> {
    pub y0: S,
    pub std_error: S,
    pub steps: Vec<StepFit<S>>,
    pub paths_used: usize,
    pub basis: Basis,
    pub uses_running_max: bool,
    picard_iters: usize,
    dt: S,
    g: GeneratorSpec<S>,
}

impl<S: Scalar> LsmcSolution<S> {
    /// Steps whose regression needed the ridge fallback.
    pub fn ridge_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.ridge_used.then_some(i))
            .collect()
    }

    /// Regression representation of `Y_{t_i}` as a function of the state.
    pub fn conditional(&self, i: usize) -> Result<LsmcConditional<'_, S>> {
        if i >= self.steps.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                max: self.steps.len().saturating_sub(1),
            });
        }
        Ok(LsmcConditional { sol: self, step: i })
    }
}

/// `x -> Y_{t_i}(x)` reconstructed from the step-`i` coefficients.
#[derive(Debug, Clone, Copy)]
pub struct LsmcConditional<'a, S> {
    sol: &'a LsmcSolution<S>,
    step: usize,
}

impl<S: Scalar> LsmcConditional<'_, S> {
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn z(&self, state: &[S]) -> Vec<S> {
        let fit = &self.sol.steps[self.step];
        fit.z
            .iter()
            .map(|c| self.sol.basis.eval(c, state, fit.scale))
            .collect()
    }

    pub fn eval(&self, state: &[S]) -> Result<S> {
        let fit = &self.sol.steps[self.step];
        let mean = self.sol.basis.eval(&fit.mean, state, fit.scale);
        let z = self.z(state);
        let mut v = mean;
        for _ in 0..self.sol.picard_iters {
            v = mean + self.sol.g.eval_at(fit.time, v, &z)? * self.sol.dt;
        }
        Ok(v)
    }
}

/// Regression state of path `m` at step `i`: positions, then running maxima.
fn fill_state<S: Scalar>(view: &PathView<'_, S>, i: usize, running_max: bool, out: &mut Vec<S>) {
    out.clear();
    out.extend_from_slice(view.at(i));
    if running_max {
        for k in 0..view.dim() {
            out.push(view.running_max(i, k));
        }
    }
}

pub fn solve_lsmc<S: Scalar>(
    g: &GeneratorSpec<S>,
    claim: &Claim<S>,
    paths: &PathBundle<S>,
    degree: usize,
    picard_iters: usize,
) -> Result<LsmcSolution<S>> {
    solve_lsmc_with(g, claim, paths, &LsmcOptions::new(degree, picard_iters))
}

pub fn solve_lsmc_with<S: Scalar>(
    g: &GeneratorSpec<S>,
    claim: &Claim<S>,
    paths: &PathBundle<S>,
    opts: &LsmcOptions<S>,
) -> Result<LsmcSolution<S>> {
    if opts.degree == 0 {
        return Err(Error::InvalidInput("basis degree must be at least 1".into()));
    }
    if opts.picard_iters == 0 {
        return Err(Error::InvalidInput("picard_iters must be at least 1".into()));
    }
    let d = paths.dim();
    if g.dim() != d || claim.dim() != d {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: generator {}, claim {}, paths {d}",
            g.dim(),
            claim.dim()
        )));
    }
    let m = paths.paths();
    let grid = *paths.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let running_max = claim.uses_running_max();
    let basis = Basis {
        state_dim: if running_max { 2 * d } else { d },
        degree: opts.degree,
    };
    let nb = basis.size();

    let positions: Vec<Vec<S>> = (0..m).into_par_iter().map(|p| paths.positions(p)).collect();

    let mut y: Vec<S> = positions
        .par_iter()
        .enumerate()
        .map(|(p, pos)| {
            claim
                .eval_path(&PathView::new(d, pos))
                .map_err(|e| Error::eval(format!("claim {} on path {p}", claim.label()), e))
        })
        .collect::<Result<_>>()?;
    // Pathwise `xi + sum g dt`: the regression target and the source of the standard error.
    let mut contributions = y.clone();
    let mut steps = vec![None; n];

    for i in (0..n).rev() {
        let t_rel = grid.time(i);
        let time = opts.time_origin + t_rel;
        let scale = if t_rel > S::zero() { t_rel.sqrt() } else { S::one() };

        let design: Vec<S> = positions
            .par_iter()
            .flat_map_iter(|pos| {
                let view = PathView::new(d, pos);
                let mut state = Vec::with_capacity(basis.state_dim);
                fill_state(&view, i, running_max, &mut state);
                let mut row = vec![S::zero(); nb];
                basis.fill(&state, scale, &mut row);
                row
            })
            .collect();

        let mut targets: Vec<Vec<S>> = Vec::with_capacity(1 + d);
        targets.push(contributions.clone());
        for k in 0..d {
            targets.push(
                (0..m)
                    .into_par_iter()
                    .map(|p| contributions[p] * paths.increment(p, i)[k] / dt)
                    .collect(),
            );
        }
        let target_refs: Vec<&[S]> = targets.iter().map(Vec::as_slice).collect();
        let fit = least_squares(&design, nb, &target_refs)?;
        let mean_coeffs = fit.coeffs[0].clone();
        let z_coeffs: Vec<Vec<S>> = fit.coeffs[1..].to_vec();

        let updated: Vec<(S, S)> = (0..m)
            .into_par_iter()
            .map(|p| {
                let row = &design[p * nb..(p + 1) * nb];
                let mean = dot(&mean_coeffs, row);
                let z: Vec<S> = z_coeffs.iter().map(|c| dot(c, row)).collect();
                if !mean.is_finite() || z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        at: format!("step {i}, path {p} regression"),
                    });
                }
                let mut v = mean;
                let mut gv = S::zero();
                for _ in 0..opts.picard_iters {
                    gv = g.eval_at(time, v, &z)?;
                    v = mean + gv * dt;
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        at: format!("step {i}, path {p}"),
                    });
                }
                Ok((v, gv * dt))
            })
            .collect::<Result<_>>()?;

        for (p, (v, inc)) in updated.into_iter().enumerate() {
            y[p] = v;
            contributions[p] = contributions[p] + inc;
        }
        steps[i] = Some(StepFit {
            time,
            scale,
            mean: mean_coeffs,
            z: z_coeffs,
            ridge_used: fit.ridge_used,
        });
    }

    let (y0, _) = mean_and_sd(&y);
    let (_, sd) = mean_and_sd(&contributions);
    let std_error = sd / S::from_usize_lossy(m).sqrt();
    if !y0.is_finite() || !std_error.is_finite() {
        return Err(Error::NonFinite { at: "step 0 average".into() });
    }
    Ok(LsmcSolution {
        y0,
        std_error,
        steps: steps.into_iter().map(|s| s.expect("every step fitted")).collect(),
        paths_used: m,
        basis,
        uses_running_max: running_max,
        picard_iters: opts.picard_iters,
        dt,
        g: g.clone(),
    })
}
