//! Least-squares fits with deterministic, thread-count-independent reductions.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rows per reduction leaf. Fixed so the summation tree depends only on `M`.
const CHUNK: usize = 1024;

/// Ridge added to the normalized Gram matrix when it is singular.
pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Relative pivot threshold below which the Gram matrix counts as singular.
const PIVOT_REL: f64 = 1e-10;

/// Monomials `1, u, u^2, ..., u^p` in each standardized state coordinate
/// `u = s / scale`, without cross terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    pub state_dim: usize,
    pub degree: usize,
}

impl Basis {
    pub fn size(&self) -> usize {
        1 + self.state_dim * self.degree
    }

    pub fn fill<S: Scalar>(&self, state: &[S], scale: S, out: &mut [S]) {
        debug_assert_eq!(out.len(), self.size());
        out[0] = S::one();
        let mut k = 1;
        for &s in state {
            let u = s / scale;
            let mut p = S::one();
            for _ in 0..self.degree {
                p = p * u;
                out[k] = p;
                k += 1;
            }
        }
    }

    pub fn eval<S: Scalar>(&self, coeffs: &[S], state: &[S], scale: S) -> S {
        let mut row = vec![S::zero(); self.size()];
        self.fill(state, scale, &mut row);
        dot(coeffs, &row)
    }
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

#[derive(Debug, Clone)]
pub struct Fit<S> {
    /// One coefficient vector per target.
    pub coeffs: Vec<Vec<S>>,
    pub ridge_used: bool,
}

/// Fits every target column against `design` (row-major, `n` columns).
pub fn least_squares<S: Scalar>(design: &[S], n: usize, targets: &[&[S]]) -> Result<Fit<S>> {
    let rows = design.len() / n;
    if rows == 0 || targets.iter().any(|t| t.len() != rows) {
        return Err(Error::InvalidInput("regression targets do not match design rows".into()));
    }
    let nt = targets.len();
    // Per-chunk [gram (n*n) | rhs (n*nt)] in row order, then a pairwise tree.
    let width = n * n + n * nt;
    let partials: Vec<Vec<S>> = (0..rows.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![S::zero(); width];
            for r in c * CHUNK..((c + 1) * CHUNK).min(rows) {
                let row = &design[r * n..(r + 1) * n];
                for a in 0..n {
                    for b in a..n {
                        acc[a * n + b] = acc[a * n + b] + row[a] * row[b];
                    }
                    for (t, target) in targets.iter().enumerate() {
                        let idx = n * n + t * n + a;
                        acc[idx] = acc[idx] + row[a] * target[r];
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = tree_sum(&partials);
    let inv_rows = S::one() / S::from_usize_lossy(rows);
    total.iter_mut().for_each(|v| *v = *v * inv_rows);
    let mut gram = vec![S::zero(); n * n];
    for a in 0..n {
        for b in a..n {
            gram[a * n + b] = total[a * n + b];
            gram[b * n + a] = total[a * n + b];
        }
    }

    let (factor, ridge_used) = match cholesky(&gram, n, S::zero()) {
        Some(l) => (l, false),
        None => (
            cholesky(&gram, n, S::lit(RIDGE_LAMBDA)).ok_or_else(|| Error::NonFinite {
                at: "regression normal equations".into(),
            })?,
            true,
        ),
    };
    let coeffs = (0..nt)
        .map(|t| solve_cholesky(&factor, n, &total[n * n + t * n..n * n + (t + 1) * n]))
        .collect();
    Ok(Fit { coeffs, ridge_used })
}

fn tree_sum<S: Scalar>(parts: &[Vec<S>]) -> Vec<S> {
    match parts.len() {
        0 => Vec::new(),
        1 => parts[0].clone(),
        len => {
            let mid = len / 2;
            let a = tree_sum(&parts[..mid]);
            let b = tree_sum(&parts[mid..]);
            a.iter().zip(&b).map(|(&x, &y)| x + y).collect()
        }
    }
}

/// Lower Cholesky factor of `gram + ridge * I`, or `None` if a pivot falls
/// below the relative threshold.
fn cholesky<S: Scalar>(gram: &[S], n: usize, ridge: S) -> Option<Vec<S>> {
    let max_diag = (0..n).map(|k| gram[k * n + k]).fold(S::zero(), S::max);
    let floor = S::lit(PIVOT_REL) * max_diag.max(S::min_positive_value());
    let mut l = vec![S::zero(); n * n];
    for j in 0..n {
        let mut d = gram[j * n + j] + ridge;
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > floor) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = gram[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(l)
}

fn solve_cholesky<S: Scalar>(l: &[S], n: usize, b: &[S]) -> Vec<S> {
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}
