//! Identities for the shifted driver `g(t, y - c, z)` and the dilated driver
//! `a g(t, y / a, z / a)`. Both are exact changes of variables in the lattice
//! recursion.

use crate::error::{Error, Result};
use crate::model::{Claim, GeneratorSpec, TimeGrid};
use crate::scalar::Scalar;
use crate::solvers::LatticeSolver;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformSide<S> {
    pub lhs: S,
    pub rhs: S,
    pub diff: S,
}

impl<S: Scalar> TransformSide<S> {
    fn new(lhs: S, rhs: S) -> Self {
        Self {
            lhs,
            rhs,
            diff: (lhs - rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformCheck<S> {
    /// `E_{g^c}[xi + c]` against `E_g[xi] + c`.
    pub shift: TransformSide<S>,
    /// `E_{g~a}[a xi]` against `a E_g[xi]`.
    pub dilation: TransformSide<S>,
    pub tol: S,
    pub pass: bool,
}

pub fn transform_identity_checks<S: Scalar>(
    g: &GeneratorSpec<S>,
    c: S,
    alpha: S,
    claim: &Claim<S>,
    grid: TimeGrid<S>,
    tol: S,
) -> Result<TransformCheck<S>> {
    if !(alpha > S::zero()) {
        return Err(Error::InvalidInput(format!("dilation factor must be positive, got {alpha}")));
    }
    let base = LatticeSolver::new(g, grid)?.solve(claim)?.y0();
    let shifted_g = g.shifted_in_y(c);
    let shifted = LatticeSolver::new(&shifted_g, grid)?.solve(&claim.shifted(c))?.y0();
    let dilated_g = g.dilated(alpha)?;
    let dilated = LatticeSolver::new(&dilated_g, grid)?.solve(&claim.scaled(alpha))?.y0();
    let shift = TransformSide::new(shifted, base + c);
    let dilation = TransformSide::new(dilated, alpha * base);
    Ok(TransformCheck {
        shift,
        dilation,
        tol,
        pass: shift.diff <= tol && dilation.diff <= tol,
    })
}
