//! Domain types shared by the solvers and the checking harnesses.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, EvalError, Result};
use crate::rng::CounterStream;
use crate::scalar::{norm, Scalar};

/// Uniform time discretization of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<S> {
    horizon: S,
    steps: usize,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn new(horizon: S, steps: usize) -> Result<Self> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "time horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("time grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> S {
        self.horizon / S::from_usize_lossy(self.steps)
    }

    /// Grid time `t_i = i * dt`; `t_N` is pinned to the horizon.
    pub fn time(&self, i: usize) -> S {
        if i == self.steps {
            self.horizon
        } else {
            S::from_usize_lossy(i) * self.dt()
        }
    }

    /// Grid restricted to the first `steps` steps (same `dt`).
    pub fn truncated(&self, steps: usize) -> Result<Self> {
        if steps == 0 || steps > self.steps {
            return Err(Error::IndexOutOfRange {
                index: steps,
                max: self.steps,
            });
        }
        Ok(Self {
            horizon: self.time(steps),
            steps,
        })
    }
}

/// Properties a generator author claims. They are checked, never trusted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeclaredFlags {
    pub independent_of_y: Option<bool>,
    pub convex_in_z: Option<bool>,
    pub subadditive_in_z: Option<bool>,
    pub positively_homogeneous: Option<bool>,
}

pub type GeneratorFn<S> = dyn Fn(S, S, &[S]) -> Result<S, EvalError> + Send + Sync;

/// A BSDE driver `g(t, y, z)` with `z` in `R^d`.
#[derive(Clone)]
pub struct GeneratorSpec<S> {
    dim: usize,
    lipschitz: S,
    label: String,
    flags: DeclaredFlags,
    body: Arc<GeneratorFn<S>>,
}

impl<S: Scalar> GeneratorSpec<S> {
    pub fn new<F>(dim: usize, lipschitz: S, label: impl Into<String>, body: F) -> Self
    where
        F: Fn(S, S, &[S]) -> Result<S, EvalError> + Send + Sync + 'static,
    {
        Self::from_arc(dim, lipschitz, label, Arc::new(body))
    }

    pub fn from_arc(dim: usize, lipschitz: S, label: impl Into<String>, body: Arc<GeneratorFn<S>>) -> Self {
        assert!(dim >= 1, "generator dimension must be at least 1");
        Self {
            dim,
            lipschitz: lipschitz.max(S::zero()),
            label: label.into(),
            flags: DeclaredFlags::default(),
            body,
        }
    }

    /// Infallible bodies (the built-in catalog).
    pub fn from_fn<F>(dim: usize, lipschitz: S, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(S, S, &[S]) -> S + Send + Sync + 'static,
    {
        Self::new(dim, lipschitz, label, move |t, y, z| Ok(f(t, y, z)))
    }

    pub fn with_lipschitz(mut self, k: S) -> Self {
        self.lipschitz = k.max(S::zero());
        self
    }

    pub fn with_flags(mut self, flags: DeclaredFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> S {
        self.lipschitz
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn flags(&self) -> DeclaredFlags {
        self.flags
    }

    /// Evaluates the body, rejecting non-finite output.
    pub fn eval(&self, t: S, y: S, z: &[S]) -> Result<S, EvalError> {
        debug_assert_eq!(z.len(), self.dim);
        let v = (self.body)(t, y, z)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite {
                what: format!("generator {}", self.label),
                value: v.to_f64_lossy(),
            })
        }
    }

    /// Like [`eval`](Self::eval) but reports the evaluation point on failure.
    pub fn eval_at(&self, t: S, y: S, z: &[S]) -> Result<S> {
        self.eval(t, y, z)
            .map_err(|e| Error::eval(format!("g(t={t}, y={y}, z={z:?})"), e))
    }

    /// `(t, y, z) -> g(t, y - c, z)`: the driver solving for `xi + c` when
    /// `self` solves for `xi`.
    pub fn shifted_in_y(&self, c: S) -> Self {
        let inner = self.body.clone();
        Self {
            dim: self.dim,
            lipschitz: self.lipschitz,
            label: format!("shift[{c}]({})", self.label),
            flags: self.flags,
            body: Arc::new(move |t, y, z| inner(t, y - c, z)),
        }
    }

    /// `(t, y, z) -> a * g(t, y / a, z / a)` for `a > 0`: the driver solving
    /// for `a * xi` when `self` solves for `xi`.
    pub fn dilated(&self, a: S) -> Result<Self> {
        if !(a > S::zero()) {
            return Err(Error::InvalidInput(format!("dilation factor must be positive, got {a}")));
        }
        let inner = self.body.clone();
        Ok(Self {
            dim: self.dim,
            lipschitz: self.lipschitz,
            label: format!("dilate[{a}]({})", self.label),
            flags: self.flags,
            body: Arc::new(move |t, y, z| {
                let zs: Vec<S> = z.iter().map(|&v| v / a).collect();
                Ok(a * inner(t, y / a, &zs)?)
            }),
        })
    }
}

impl<S: fmt::Debug> fmt::Debug for GeneratorSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("flags", &self.flags)
            .finish()
    }
}

/// Brownian positions of one simulated path on the grid, row-major `[step][coord]`.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a, S> {
    dim: usize,
    positions: &'a [S],
}

impl<'a, S: Scalar> PathView<'a, S> {
    pub fn new(dim: usize, positions: &'a [S]) -> Self {
        assert!(dim >= 1 && positions.len().is_multiple_of(dim));
        Self { dim, positions }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid points on the path (`N + 1`).
    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn at(&self, i: usize) -> &'a [S] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &'a [S] {
        self.at(self.len() - 1)
    }

    /// `max_{k <= i} B_{t_k}` for coordinate `coord`.
    pub fn running_max(&self, i: usize, coord: usize) -> S {
        (0..=i)
            .map(|k| self.at(k)[coord])
            .fold(S::neg_infinity(), S::max)
    }
}

pub type TerminalFn<S> = dyn Fn(&[S]) -> Result<S, EvalError> + Send + Sync;
pub type PathFn<S> = dyn Fn(&PathView<'_, S>) -> Result<S, EvalError> + Send + Sync;

#[derive(Clone)]
pub enum ClaimKind<S> {
    /// `phi(B_T)`.
    Terminal(Arc<TerminalFn<S>>),
    /// A functional of the sampled path. `uses_running_max` appends the
    /// running maximum of every coordinate to the regression state.
    Path {
        body: Arc<PathFn<S>>,
        uses_running_max: bool,
    },
}

/// A terminal payoff in `L^2(F_T)`.
#[derive(Clone)]
pub struct Claim<S> {
    dim: usize,
    lipschitz: S,
    label: String,
    kind: ClaimKind<S>,
}

impl<S: Scalar> Claim<S> {
    pub fn terminal<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[S]) -> Result<S, EvalError> + Send + Sync + 'static,
    {
        Self {
            dim,
            lipschitz: S::zero(),
            label: label.into(),
            kind: ClaimKind::Terminal(Arc::new(f)),
        }
    }

    /// One-dimensional terminal claim from an infallible function of `B_T`.
    pub fn scalar_fn<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(S) -> S + Send + Sync + 'static,
    {
        Self::terminal(1, label, move |x: &[S]| Ok(f(x[0])))
    }

    pub fn path<F>(dim: usize, label: impl Into<String>, uses_running_max: bool, f: F) -> Self
    where
        F: Fn(&PathView<'_, S>) -> Result<S, EvalError> + Send + Sync + 'static,
    {
        Self {
            dim,
            lipschitz: S::zero(),
            label: label.into(),
            kind: ClaimKind::Path {
                body: Arc::new(f),
                uses_running_max,
            },
        }
    }

    pub fn constant(dim: usize, c: S) -> Self {
        Self::terminal(dim, format!("{c}"), move |_| Ok(c))
    }

    pub fn with_lipschitz(mut self, l: S) -> Self {
        self.lipschitz = l.max(S::zero());
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> S {
        self.lipschitz
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &ClaimKind<S> {
        &self.kind
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, ClaimKind::Terminal(_))
    }

    pub fn uses_running_max(&self) -> bool {
        matches!(
            self.kind,
            ClaimKind::Path {
                uses_running_max: true,
                ..
            }
        )
    }

    /// Value for terminal position `x = B_T`. Path functionals are rejected.
    pub fn eval_terminal(&self, x: &[S]) -> Result<S, EvalError> {
        match &self.kind {
            ClaimKind::Terminal(f) => finite(f(x)?, &self.label),
            ClaimKind::Path { .. } => Err(EvalError::NonFinite {
                what: format!("path functional {} evaluated without a path", self.label),
                value: f64::NAN,
            }),
        }
    }

    pub fn eval_path(&self, path: &PathView<'_, S>) -> Result<S, EvalError> {
        match &self.kind {
            ClaimKind::Terminal(f) => finite(f(path.terminal())?, &self.label),
            ClaimKind::Path { body, .. } => finite(body(path)?, &self.label),
        }
    }

    /// Pointwise `f(self)`.
    pub fn map<F>(&self, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(S) -> S + Send + Sync + 'static,
    {
        let lipschitz = self.lipschitz;
        let claim = match &self.kind {
            ClaimKind::Terminal(a) => {
                let a = a.clone();
                Self::terminal(self.dim, label, move |x| Ok(f(a(x)?)))
            }
            ClaimKind::Path {
                body,
                uses_running_max,
            } => {
                let a = body.clone();
                Self::path(self.dim, label, *uses_running_max, move |p| Ok(f(a(p)?)))
            }
        };
        claim.with_lipschitz(lipschitz)
    }

    /// Pointwise `f(self, other)`.
    pub fn zip_with<F>(&self, other: &Self, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(S, S) -> S + Send + Sync + 'static,
    {
        assert_eq!(self.dim, other.dim, "claims must share the Brownian dimension");
        let lipschitz = self.lipschitz + other.lipschitz;
        let claim = match (&self.kind, &other.kind) {
            (ClaimKind::Terminal(a), ClaimKind::Terminal(b)) => {
                let (a, b) = (a.clone(), b.clone());
                Self::terminal(self.dim, label, move |x| Ok(f(a(x)?, b(x)?)))
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                let rm = self.uses_running_max() || other.uses_running_max();
                Self::path(self.dim, label, rm, move |p| Ok(f(a.eval_path(p)?, b.eval_path(p)?)))
            }
        };
        claim.with_lipschitz(lipschitz)
    }

    pub fn negated(&self) -> Self {
        self.map(format!("-({})", self.label), |v| -v)
    }

    pub fn shifted(&self, c: S) -> Self {
        self.map(format!("({})+{c}", self.label), move |v| v + c)
    }

    pub fn scaled(&self, a: S) -> Self {
        let l = self.lipschitz * a.abs();
        self.map(format!("{a}*({})", self.label), move |v| a * v)
            .with_lipschitz(l)
    }

    pub fn plus(&self, other: &Self) -> Self {
        self.zip_with(other, format!("({})+({})", self.label, other.label), |a, b| a + b)
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Self, alpha: S) -> Self {
        let beta = S::one() - alpha;
        self.zip_with(
            other,
            format!("{alpha}*({})+{beta}*({})", self.label, other.label),
            move |a, b| alpha * a + beta * b,
        )
    }

    pub fn pointwise_max(&self, other: &Self) -> Self {
        self.zip_with(other, format!("max({},{})", self.label, other.label), S::max)
    }
}

fn finite<S: Scalar>(v: S, label: &str) -> Result<S, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite {
            what: format!("claim {label}"),
            value: v.to_f64_lossy(),
        })
    }
}

impl<S> fmt::Debug for Claim<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Claim")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("terminal", &matches!(self.kind, ClaimKind::Terminal(_)))
            .finish()
    }
}

/// Sampling ranges for assumption and generator-property checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox<S> {
    pub t: (S, S),
    pub y: (S, S),
    pub z: (S, S),
}

impl<S: Scalar> SampleBox<S> {
    /// `t in [0, T]`, `y in [-10, 10]`, each `z` coordinate in `[-10, 10]`.
    pub fn standard(horizon: S) -> Self {
        let ten = S::lit(10.0);
        Self {
            t: (S::zero(), horizon),
            y: (-ten, ten),
            z: (-ten, ten),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("t", self.t), ("y", self.y), ("z", self.z)] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidInput(format!(
                    "sampling range for {name} must be finite with lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn draw(&self, stream: &mut CounterStream, dim: usize) -> (S, S, Vec<S>) {
        let t = stream.uniform_in(self.t.0, self.t.1);
        let y = stream.uniform_in(self.y.0, self.y.1);
        let z = (0..dim).map(|_| stream.uniform_in(self.z.0, self.z.1)).collect();
        (t, y, z)
    }
}

/// Outcome of the sampled (A1)/(A3) checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport<S> {
    pub a1_max_quotient: S,
    pub a1_pass: bool,
    pub a3_max_abs: S,
    pub a3_pass: bool,
    pub samples: usize,
    pub tolerance: S,
}

/// Falsification test of a generator's declared Lipschitz constant (A1) and
/// of `g(t, y, 0) = 0` (A3).
///
/// Each sample `k` draws `t`, two `(y, z)` points and uses stream `k`, so the
/// report depends only on `(seed, box, n_samples)`.
pub fn validate_assumptions<S: Scalar>(
    g: &GeneratorSpec<S>,
    sample_box: &SampleBox<S>,
    n_samples: usize,
    tol: S,
    seed: u64,
) -> Result<AssumptionReport<S>> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    if !(tol > S::zero()) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    sample_box.validate()?;
    let dim = g.dim();
    let zero_z = vec![S::zero(); dim];

    let per_sample: Vec<(S, S)> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut stream = CounterStream::new(seed, k as u64);
            let (t, y1, z1) = sample_box.draw(&mut stream, dim);
            let y2 = stream.uniform_in(sample_box.y.0, sample_box.y.1);
            let z2: Vec<S> = (0..dim)
                .map(|_| stream.uniform_in(sample_box.z.0, sample_box.z.1))
                .collect();
            let g1 = g.eval_at(t, y1, &z1)?;
            let g2 = g.eval_at(t, y2, &z2)?;
            let dz: Vec<S> = z1.iter().zip(&z2).map(|(a, b)| *a - *b).collect();
            let denom = (y1 - y2).abs() + norm(&dz);
            let quotient = if denom > S::zero() {
                (g1 - g2).abs() / denom
            } else {
                S::zero()
            };
            let at_zero = g.eval_at(t, y1, &zero_z)?.abs();
            Ok((quotient, at_zero))
        })
        .collect::<Result<_>>()?;

    let (q, a3) = per_sample
        .iter()
        .fold((S::zero(), S::zero()), |(q, a), &(qk, ak)| (q.max(qk), a.max(ak)));
    Ok(AssumptionReport {
        a1_max_quotient: q,
        a1_pass: q <= g.lipschitz() * (S::one() + tol),
        a3_max_abs: a3,
        a3_pass: a3 <= tol,
        samples: n_samples,
        tolerance: tol,
    })
}
