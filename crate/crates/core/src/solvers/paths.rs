use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::TimeGrid;
use crate::rng::CounterStream;
use crate::scalar::Scalar;

/// Simulated Brownian increments, laid out `[path][step][coord]`.
///
/// Increment `(m, i, k)` is `sqrt(dt)` times the inverse-CDF normal of draw
/// `i * d + k` on counter stream `(seed, m)`, so a bundle is a pure function of
/// `(seed, d, grid, M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle<S> {
    dim: usize,
    grid: TimeGrid<S>,
    paths: usize,
    seed: u64,
    increments: Vec<S>,
}

pub fn simulate_paths<S: Scalar>(dim: usize, grid: TimeGrid<S>, paths: usize, seed: u64) -> Result<PathBundle<S>> {
    if dim == 0 {
        return Err(Error::InvalidInput("Brownian dimension must be at least 1".into()));
    }
    if paths < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 paths, got {paths}")));
    }
    let per_path = grid.steps() * dim;
    let total = per_path
        .checked_mul(paths)
        .ok_or_else(|| Error::Resource {
            requested: usize::MAX,
            detail: format!("{paths} paths x {} steps x {dim} coordinates overflows", grid.steps()),
        })?;
    let mut increments: Vec<S> = Vec::new();
    increments.try_reserve_exact(total).map_err(|e| Error::Resource {
        requested: total,
        detail: format!("{paths} paths x {} steps x {dim} coordinates: {e}", grid.steps()),
    })?;
    increments.resize(total, S::zero());

    let sqrt_dt = grid.dt().sqrt();
    increments
        .par_chunks_mut(per_path)
        .enumerate()
        .for_each(|(m, row)| {
            let mut stream = CounterStream::new(seed, m as u64);
            for v in row.iter_mut() {
                *v = sqrt_dt * stream.normal::<S>();
            }
        });

    Ok(PathBundle {
        dim,
        grid,
        paths,
        seed,
        increments,
    })
}

impl<S: Scalar> PathBundle<S> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `Delta B` over step `i` on path `m`.
    pub fn increment(&self, m: usize, i: usize) -> &[S] {
        let per_path = self.grid.steps() * self.dim;
        let start = m * per_path + i * self.dim;
        &self.increments[start..start + self.dim]
    }

    /// Positions `B_{t_0}, ..., B_{t_N}` of path `m` with `B_0 = 0`.
    pub fn positions(&self, m: usize) -> Vec<S> {
        let n = self.grid.steps();
        let mut out = vec![S::zero(); (n + 1) * self.dim];
        for i in 0..n {
            let inc = self.increment(m, i);
            for k in 0..self.dim {
                out[(i + 1) * self.dim + k] = out[i * self.dim + k] + inc[k];
            }
        }
        out
    }

    /// The same paths restricted to the first `steps` steps.
    pub fn truncated(&self, steps: usize) -> Result<Self> {
        let grid = self.grid.truncated(steps)?;
        let per_path = self.grid.steps() * self.dim;
        let keep = steps * self.dim;
        let mut increments = Vec::with_capacity(keep * self.paths);
        for m in 0..self.paths {
            increments.extend_from_slice(&self.increments[m * per_path..m * per_path + keep]);
        }
        Ok(Self {
            dim: self.dim,
            grid,
            paths: self.paths,
            seed: self.seed,
            increments,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::mean_and_sd;

    #[test]
    fn increments_have_brownian_moments() {
        let grid = TimeGrid::new(1.0_f64, 1).unwrap();
        let m = 1_000_000;
        let b = simulate_paths(1, grid, m, 7).unwrap();
        let inc: Vec<f64> = (0..m).map(|p| b.increment(p, 0)[0]).collect();
        let (mean, sd) = mean_and_sd(&inc);
        let dt = grid.dt();
        assert!(mean.abs() <= 5.0 * (dt / m as f64).sqrt(), "mean {mean}");
        // sample variance SE is dt * sqrt(2 / M)
        assert!((sd * sd - dt).abs() <= 5.0 * dt * (2.0 / m as f64).sqrt(), "var {}", sd * sd);
    }

    #[test]
    fn same_seed_same_bundle() {
        let grid = TimeGrid::new(1.0_f64, 5).unwrap();
        let a = simulate_paths(2, grid, 1000, 3).unwrap();
        let b = simulate_paths(2, grid, 1000, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_paths(2, grid, 1000, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn thread_count_does_not_change_draws() {
        let grid = TimeGrid::new(1.0_f64, 8).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| simulate_paths(1, grid, 4000, 9).unwrap());
        let b = four.install(|| simulate_paths(1, grid, 4000, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn coordinates_are_uncorrelated() {
        let grid = TimeGrid::new(1.0_f64, 4).unwrap();
        let m = 200_000;
        let b = simulate_paths(2, grid, m, 11).unwrap();
        let dt = grid.dt();
        for i in 0..4 {
            let prod: Vec<f64> = (0..m)
                .map(|p| {
                    let d = b.increment(p, i);
                    d[0] * d[1]
                })
                .collect();
            let (mean, _) = mean_and_sd(&prod);
            // Var(dB1 dB2) = dt^2
            assert!(mean.abs() <= 5.0 * dt / (m as f64).sqrt(), "step {i}: {mean}");
        }
    }

    #[test]
    fn positions_start_at_zero_and_truncation_keeps_prefix() {
        let grid = TimeGrid::new(1.0_f64, 6).unwrap();
        let b = simulate_paths(1, grid, 10, 1).unwrap();
        let p = b.positions(3);
        assert_eq!(p[0], 0.0);
        let t = b.truncated(4).unwrap();
        assert_eq!(t.grid().steps(), 4);
        assert_eq!(&t.positions(3)[..], &p[..5]);
        assert!(b.truncated(7).is_err());
    }

    #[test]
    fn preconditions() {
        let grid = TimeGrid::new(1.0_f64, 2).unwrap();
        assert!(simulate_paths(1, grid, 1, 0).is_err());
        assert!(simulate_paths(0, grid, 10, 0).is_err());
        assert!(matches!(
            simulate_paths(1, grid, usize::MAX / 2, 0),
            Err(Error::Resource { .. })
        ));
    }
}
