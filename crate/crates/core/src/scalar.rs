//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the engine can run on.
///
/// Everything in the crate is written against this trait; `f64` is the
/// production type and `f32` is supported for low-precision experiments.
/// Transcendental functions come from the `std` implementations behind
/// [`num_traits::Float`], so results are reproducible on a given build.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Values outside the range of `Self` saturate to infinity.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }

    /// Absolute tolerance used by fixed-point loops: `1e-14`, widened to a few
    /// ulps of `scale` when the type cannot resolve `1e-14`.
    #[inline]
    fn fixed_point_tol(scale: Self) -> Self {
        let floor = Self::lit(1e-14);
        let ulps = Self::epsilon() * Self::lit(8.0) * scale.abs().max(Self::one());
        floor.max(ulps)
    }
}

impl Scalar for f64 {}
impl Scalar for f32 {}

/// Euclidean norm of a vector.
pub fn norm<S: Scalar>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Deterministic pairwise (tree) summation in index order.
///
/// The split points depend only on the slice length, so the result is the
/// same no matter how the inputs were produced.
pub fn pairwise_sum<S: Scalar>(values: &[S]) -> S {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().fold(S::zero(), |acc, &x| acc + x);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean and (unbiased) standard deviation, both via [`pairwise_sum`].
pub fn mean_and_sd<S: Scalar>(values: &[S]) -> (S, S) {
    let n = values.len();
    if n == 0 {
        return (S::nan(), S::nan());
    }
    let mean = pairwise_sum(values) / S::from_usize_lossy(n);
    if n < 2 {
        return (mean, S::zero());
    }
    let sq: Vec<S> = values.iter().map(|&v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / S::from_usize_lossy(n - 1);
    (mean, var.sqrt())
}
