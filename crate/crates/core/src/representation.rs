//! Recovering a driver from short-horizon prices.
//!
//! For an affine terminal claim `y + z . (B_{t+eps} - B_t)` the solution value
//! at `t` moves away from `y` at rate `g(t, y, z)` as `eps -> 0`. The slopes
//! are extrapolated assuming an error linear in `eps`.

use rayon::prelude::*;

use crate::error::{Error, EvalError, Result};
use crate::expectation::LsmcConfig;
use crate::model::{Claim, GeneratorSpec, TimeGrid};
use crate::scalar::Scalar;
use crate::solvers::{simulate_paths, solve_lsmc_with, LatticeSolver, LsmcOptions, StepTime};

/// Lattice steps per horizon `eps`.
pub const STEPS_PER_EPS: usize = 64;
/// Composite Simpson panels used by [`local_average`].
pub const SIMPSON_PANELS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecoveryMethod {
    /// Midpoint-in-time lattice; `d = 1` only.
    #[default]
    Lattice,
    Lsmc(LsmcConfig),
}

/// `eps_k = 2^-k * horizon` for `k = 4..=8`.
pub fn default_eps_schedule<S: Scalar>(horizon: S) -> Vec<S> {
    (4..=8).map(|k| horizon * S::lit(2f64.powi(-k))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTarget<S> {
    pub t: S,
    pub y: S,
    pub z: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult<S> {
    pub target: RecoveryTarget<S>,
    pub eps_schedule: Vec<S>,
    pub raw_slopes: Vec<S>,
    pub extrapolated: S,
    /// `|s_{k-1} - s_k|` for the last two slopes.
    pub residual: S,
    /// Standard error of each slope (zero on the lattice).
    pub slope_std_errors: Vec<S>,
}

fn validate_schedule<S: Scalar>(t: S, horizon: S, eps: &[S]) -> Result<()> {
    if eps.len() < 2 {
        return Err(Error::InvalidInput("eps schedule needs at least two values".into()));
    }
    if eps.iter().any(|&e| !(e > S::zero()) || !e.is_finite()) {
        return Err(Error::InvalidInput("eps values must be positive and finite".into()));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("eps schedule must be strictly decreasing".into()));
    }
    if !(t >= S::zero()) || t + eps[0] > horizon {
        return Err(Error::InvalidInput(format!(
            "need 0 <= t and t + max eps <= T; got t = {t}, max eps = {}, T = {horizon}",
            eps[0]
        )));
    }
    Ok(())
}

/// Richardson value and residual from the last two `(eps, slope)` pairs.
pub fn richardson<S: Scalar>(eps: &[S], slopes: &[S]) -> (S, S) {
    let k = slopes.len();
    let (e1, e2) = (eps[k - 2], eps[k - 1]);
    let (s1, s2) = (slopes[k - 2], slopes[k - 1]);
    ((e1 * s2 - e2 * s1) / (e1 - e2), (s1 - s2).abs())
}

pub fn recover_generator<S: Scalar>(
    g: &GeneratorSpec<S>,
    target: RecoveryTarget<S>,
    horizon: S,
    eps_schedule: &[S],
    steps_per_eps: usize,
    method: RecoveryMethod,
) -> Result<RecoveryResult<S>> {
    validate_schedule(target.t, horizon, eps_schedule)?;
    if target.z.len() != g.dim() {
        return Err(Error::InvalidInput(format!(
            "target z has {} coordinates, generator has d = {}",
            target.z.len(),
            g.dim()
        )));
    }
    if steps_per_eps == 0 {
        return Err(Error::InvalidInput("steps per eps must be at least 1".into()));
    }
    let (y, z) = (target.y, target.z.clone());
    let claim = Claim::terminal(g.dim(), "y + z.x", move |x: &[S]| {
        Ok::<S, EvalError>(x.iter().zip(&z).fold(y, |acc, (&xi, &zi)| acc + zi * xi))
    });

    let per_eps: Vec<(S, S)> = eps_schedule
        .par_iter()
        .enumerate()
        .map(|(k, &eps)| {
            let grid = TimeGrid::new(eps, steps_per_eps)?;
            let (y0, se) = match method {
                RecoveryMethod::Lattice => {
                    let sol = LatticeSolver::new(g, grid)?
                        .step_time(StepTime::Midpoint)
                        .time_origin(target.t)
                        .solve(&claim)?;
                    (sol.y0(), S::zero())
                }
                RecoveryMethod::Lsmc(cfg) => {
                    let paths = simulate_paths(g.dim(), grid, cfg.paths, cfg.seed.wrapping_add(k as u64))?;
                    let mut opts = LsmcOptions::new(cfg.degree, cfg.picard_iters);
                    opts.time_origin = target.t;
                    let sol = solve_lsmc_with(g, &claim, &paths, &opts)?;
                    (sol.y0, sol.std_error)
                }
            };
            let slope = (y0 - target.y) / eps;
            if !slope.is_finite() {
                return Err(Error::NonFinite {
                    at: format!("slope at eps = {eps}"),
                });
            }
            Ok((slope, se / eps))
        })
        .collect::<Result<_>>()?;

    let (raw_slopes, slope_std_errors): (Vec<S>, Vec<S>) = per_eps.into_iter().unzip();
    let (extrapolated, residual) = richardson(eps_schedule, &raw_slopes);
    Ok(RecoveryResult {
        target,
        eps_schedule: eps_schedule.to_vec(),
        raw_slopes,
        extrapolated,
        residual,
        slope_std_errors,
    })
}

/// `(1/eps) * int_t^{t+eps} psi(s) ds` by composite Simpson.
pub fn local_average<S, F>(psi: F, t: S, eps: S) -> Result<S>
where
    S: Scalar,
    F: Fn(S) -> Result<S, EvalError>,
{
    if !(eps > S::zero()) || !eps.is_finite() || !t.is_finite() {
        return Err(Error::InvalidInput(format!("need finite t and eps > 0, got t = {t}, eps = {eps}")));
    }
    let n = SIMPSON_PANELS;
    let h = eps / S::from_usize_lossy(n);
    let mut sum = S::zero();
    for k in 0..=n {
        let s = if k == n { t + eps } else { t + S::from_usize_lossy(k) * h };
        let v = psi(s).map_err(|e| Error::eval(format!("psi({s})"), e))?;
        if !v.is_finite() {
            return Err(Error::NonFinite { at: format!("psi({s})") });
        }
        let w = if k == 0 || k == n {
            S::one()
        } else if k % 2 == 1 {
            S::lit(4.0)
        } else {
            S::lit(2.0)
        };
        sum = sum + w * v;
    }
    Ok(sum * h / S::lit(3.0) / eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport<S> {
    pub eps_schedule: Vec<S>,
    /// Recovery slopes.
    pub slopes: Vec<S>,
    /// Local averages of `s -> g(s, y, z)` over `[t, t + eps]`.
    pub averages: Vec<S>,
    pub gaps: Vec<S>,
    pub max_gap: S,
    /// Richardson limits of the two sequences.
    pub slope_limit: S,
    pub average_limit: S,
}

/// Compares the recovery slopes against local time averages of the driver.
pub fn limit_equivalence_check<S: Scalar>(
    g: &GeneratorSpec<S>,
    target: RecoveryTarget<S>,
    horizon: S,
    eps_schedule: &[S],
    steps_per_eps: usize,
) -> Result<EquivalenceReport<S>> {
    let (y, z) = (target.y, target.z.clone());
    let rec = recover_generator(g, target.clone(), horizon, eps_schedule, steps_per_eps, RecoveryMethod::Lattice)?;
    let averages = eps_schedule
        .iter()
        .map(|&eps| local_average(|s| g.eval(s, y, &z), target.t, eps))
        .collect::<Result<Vec<S>>>()?;
    let gaps: Vec<S> = rec
        .raw_slopes
        .iter()
        .zip(&averages)
        .map(|(&a, &b)| (a - b).abs())
        .collect();
    let max_gap = gaps.iter().fold(S::zero(), |m, &v| m.max(v));
    let (average_limit, _) = richardson(eps_schedule, &averages);
    Ok(EquivalenceReport {
        eps_schedule: eps_schedule.to_vec(),
        slope_limit: rec.extrapolated,
        slopes: rec.raw_slopes,
        averages,
        gaps,
        max_gap,
        average_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn target(y: f64, z: f64) -> RecoveryTarget<f64> {
        RecoveryTarget { t: 0.0, y, z: vec![z] }
    }

    #[test]
    fn constant_slope_for_abs_z() {
        let eps = default_eps_schedule(1.0);
        let r = recover_generator(&catalog::abs_z(0.3), target(0.0, 2.0), 1.0, &eps, 64, RecoveryMethod::Lattice)
            .unwrap();
        for s in &r.raw_slopes {
            assert!((s - 0.6).abs() < 1e-12, "{s}");
        }
        assert!((r.extrapolated - 0.6).abs() < 1e-10);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn zero_driver_zero_slopes() {
        let eps = default_eps_schedule(1.0);
        let r = recover_generator(&catalog::zero(), target(1.5, -3.0), 1.0, &eps, 64, RecoveryMethod::Lattice)
            .unwrap();
        assert!(r.raw_slopes.iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn time_dependent_driver_extrapolates_to_left_end() {
        let eps = default_eps_schedule(1.0);
        let r = recover_generator(&catalog::abs_z_time(0.3), target(0.0, 1.0), 1.0, &eps, 64, RecoveryMethod::Lattice)
            .unwrap();
        for (e, s) in eps.iter().zip(&r.raw_slopes) {
            assert!((s - 0.3 * (1.0 + e / 2.0)).abs() < 1e-12);
        }
        assert!((r.extrapolated - 0.3).abs() < 1e-4);
    }

    #[test]
    fn schedule_preconditions() {
        let g = catalog::zero::<f64>();
        let bad = |eps: &[f64], t: f64| recover_generator(&g, RecoveryTarget { t, y: 0.0, z: vec![1.0] }, 1.0, eps, 8, RecoveryMethod::Lattice).is_err();
        assert!(bad(&[0.1], 0.0));
        assert!(bad(&[0.1, 0.2], 0.0));
        assert!(bad(&[0.5, 0.25], 0.75));
        assert!(bad(&[0.5, 0.0], 0.0));
    }

    #[test]
    fn local_average_examples() {
        let sq = |s: f64| Ok(s * s);
        let exact = |e: f64| ((1.0 + e).powi(3) - 1.0) / 3.0 / e;
        for e in [0.1, 0.01] {
            assert!((local_average(sq, 1.0, e).unwrap() - exact(e)).abs() < 1e-13);
        }
        assert!((local_average(sq, 1.0, 0.1).unwrap() - 1.1033333333333333).abs() < 1e-12);
        assert_eq!(local_average(|_| Ok(2.5_f64), 0.3, 0.7).unwrap(), 2.5);
        assert!((local_average(|s: f64| Ok(s), 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(local_average(|_| Ok(f64::NAN), 0.0, 1.0).is_err());
    }

    #[test]
    fn equivalence_on_time_dependent_driver() {
        let eps = default_eps_schedule(1.0);
        let r = limit_equivalence_check(&catalog::abs_z_time(0.3), target(0.0, 1.0), 1.0, &eps, 64).unwrap();
        assert!(r.max_gap < 1e-10, "{}", r.max_gap);
        assert!((r.slope_limit - r.average_limit).abs() < 1e-10);
    }
}
