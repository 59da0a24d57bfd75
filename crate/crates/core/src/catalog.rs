//! Reference drivers and claims with known behaviour.

use crate::gdsl::parse_claim;
use crate::model::{Claim, DeclaredFlags, GeneratorSpec};
use crate::scalar::Scalar;

pub fn zero<S: Scalar>() -> GeneratorSpec<S> {
    GeneratorSpec::from_fn(1, S::zero(), "0", |_, _, _| S::zero()).with_flags(DeclaredFlags {
        independent_of_y: Some(true),
        convex_in_z: Some(true),
        subadditive_in_z: Some(true),
        positively_homogeneous: Some(true),
    })
}

/// `k * |z1|`: sublinear for `k >= 0`, concave for `k < 0`.
pub fn abs_z<S: Scalar>(k: S) -> GeneratorSpec<S> {
    let sublinear = Some(k >= S::zero());
    GeneratorSpec::from_fn(1, k.abs(), format!("{k}*abs(z1)"), move |_, _, z| k * z[0].abs()).with_flags(
        DeclaredFlags {
            independent_of_y: Some(true),
            convex_in_z: sublinear,
            subadditive_in_z: sublinear,
            positively_homogeneous: Some(true),
        },
    )
}

/// `k * (1 + t) * |z1|`: time-dependent, continuous in `t`.
pub fn abs_z_time<S: Scalar>(k: S) -> GeneratorSpec<S> {
    GeneratorSpec::from_fn(1, S::lit(2.0) * k.abs(), format!("{k}*(1+t)*abs(z1)"), move |t, _, z| {
        k * (S::one() + t) * z[0].abs()
    })
}

/// `sin(y) * min(|z1|, 1)`: Lipschitz with `K = 1`, depends on `y`.
pub fn sin_y_min_z<S: Scalar>() -> GeneratorSpec<S> {
    GeneratorSpec::from_fn(1, S::one(), "sin(y)*min(abs(z1),1)", |_, y: S, z: &[S]| {
        y.sin() * z[0].abs().min(S::one())
    })
}

/// `sqrt(1 + |z1|^2) - 1`: convex and `y`-free, neither subadditive nor homogeneous.
pub fn soft_abs_z<S: Scalar>() -> GeneratorSpec<S> {
    GeneratorSpec::from_fn(1, S::one(), "sqrt(1+z1*z1)-1", |_, _, z: &[S]| {
        (S::one() + z[0] * z[0]).sqrt() - S::one()
    })
    .with_flags(DeclaredFlags {
        independent_of_y: Some(true),
        convex_in_z: Some(true),
        subadditive_in_z: Some(false),
        positively_homogeneous: Some(false),
    })
}

/// `a * y + b * z1`: linear BSDE with `Y_0 = E[xi * exp(b B_T - b^2 T / 2)] * exp(a T)`.
pub fn linear<S: Scalar>(a: S, b: S) -> GeneratorSpec<S> {
    GeneratorSpec::from_fn(1, a.abs().max(b.abs()), format!("{a}*y+{b}*z1"), move |_, y, z| {
        a * y + b * z[0]
    })
}

/// Constant driver (violates `g(t, y, 0) = 0` unless `c = 0`).
pub fn constant<S: Scalar>(c: S) -> GeneratorSpec<S> {
    GeneratorSpec::from_fn(1, S::zero(), format!("{c}"), move |_, _, _| c)
}

/// Sources of the default one-dimensional claim battery.
pub const CLAIM_BATTERY: [&str; 6] = ["x", "-x", "x*x", "abs(x)", "pos(x-0.5)", "min(x,1)"];
pub const CONSTANTS: [f64; 5] = [-2.0, -0.5, 0.0, 1.0, 5.0];
pub const ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const LAMBDAS: [f64; 4] = [0.0, 0.5, 1.0, 2.5];

pub fn claim_battery<S: Scalar>() -> Vec<Claim<S>> {
    CLAIM_BATTERY
        .iter()
        .map(|src| parse_claim(src, 1).expect("battery claims parse"))
        .collect()
}

pub fn scalars<S: Scalar>(values: &[f64]) -> Vec<S> {
    values.iter().map(|&v| S::lit(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_parses_and_evaluates() {
        let b: Vec<Claim<f64>> = claim_battery();
        let at = |i: usize, x: f64| b[i].eval_terminal(&[x]).unwrap();
        assert_eq!(at(1, 2.0), -2.0);
        assert_eq!(at(2, -3.0), 9.0);
        assert_eq!(at(3, -3.0), 3.0);
        assert_eq!(at(4, 0.2), 0.0);
        assert_eq!(at(5, 4.0), 1.0);
    }

    #[test]
    fn catalog_values() {
        assert_eq!(abs_z(0.3_f64).eval(0.0, 9.0, &[-2.0]).unwrap(), 0.6);
        assert!((abs_z_time(0.3_f64).eval(1.0, 0.0, &[1.0]).unwrap() - 0.6).abs() < 1e-15);
        let s = soft_abs_z::<f64>();
        let gap = (s.eval(0.0, 0.0, &[2.0]).unwrap() - 2.0 * s.eval(0.0, 0.0, &[1.0]).unwrap()).abs();
        assert!((gap - (5f64.sqrt() - 1.0 - 2.0 * (2f64.sqrt() - 1.0))).abs() < 1e-15);
        assert!((gap - 0.408).abs() < 1e-3);
    }
}
