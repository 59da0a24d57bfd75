use std::fmt;

use crate::error::EvalError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    Y,
    /// `z{k+1}`.
    Z(usize),
    /// `x` (one dimension) or `x{k+1}`.
    X(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Min,
    Max,
    Sin,
    Cos,
    Sqrt,
    Exp,
    /// `max(a, 0)`.
    Pos,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "pos" => Func::Pos,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Pos => "pos",
        }
    }

    /// `min` and `max` take two or more arguments, everything else exactly one.
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Func::Min | Func::Max => n >= 2,
            _ => n == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Variable bindings for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a, S> {
    pub t: S,
    pub y: S,
    pub z: &'a [S],
    pub x: &'a [S],
}

impl<'a, S: Scalar> Env<'a, S> {
    pub fn generator(t: S, y: S, z: &'a [S]) -> Self {
        Self { t, y, z, x: &[] }
    }

    pub fn claim(x: &'a [S]) -> Self {
        Self {
            t: S::zero(),
            y: S::zero(),
            z: &[],
            x,
        }
    }
}

impl Expr {
    pub fn depth(&self) -> usize {
        match self {
            Expr::Number(_) | Expr::Var(_) => 1,
            Expr::Neg(e) => 1 + e.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }

    /// Visits every variable reference.
    pub fn vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Number(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Neg(e) => e.vars(out),
            Expr::Binary(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.vars(out)),
        }
    }

    /// Pure evaluation; identical inputs give identical bits on a given build.
    pub fn eval<S: Scalar>(&self, env: &Env<'_, S>) -> Result<S, EvalError> {
        match self {
            Expr::Number(v) => Ok(S::lit(*v)),
            Expr::Var(Var::T) => Ok(env.t),
            Expr::Var(Var::Y) => Ok(env.y),
            Expr::Var(Var::Z(k)) => env.z.get(*k).copied().ok_or(EvalError::Arity {
                expected: k + 1,
                got: env.z.len(),
            }),
            Expr::Var(Var::X(k)) => env.x.get(*k).copied().ok_or(EvalError::Arity {
                expected: k + 1,
                got: env.x.len(),
            }),
            Expr::Neg(e) => Ok(-e.eval(env)?),
            Expr::Binary(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == S::zero() {
                            Err(EvalError::DivisionByZero)
                        } else {
                            Ok(a / b)
                        }
                    }
                }
            }
            Expr::Call(f, args) => {
                let vals = args.iter().map(|a| a.eval(env)).collect::<Result<Vec<S>, _>>()?;
                if !f.accepts(vals.len()) {
                    return Err(EvalError::Arity {
                        expected: 1,
                        got: vals.len(),
                    });
                }
                let v = match f {
                    Func::Abs => vals[0].abs(),
                    Func::Min => vals.iter().copied().fold(S::infinity(), S::min),
                    Func::Max => vals.iter().copied().fold(S::neg_infinity(), S::max),
                    Func::Sin => vals[0].sin(),
                    Func::Cos => vals[0].cos(),
                    Func::Sqrt => vals[0].sqrt(),
                    Func::Exp => vals[0].exp(),
                    Func::Pos => vals[0].max(S::zero()),
                };
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(EvalError::NonFinite {
                        what: format!("{}()", f.name()),
                        value: v.to_f64_lossy(),
                    })
                }
            }
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => f.write_str("t"),
            Var::Y => f.write_str("y"),
            Var::Z(k) => write!(f, "z{}", k + 1),
            Var::X(k) => write!(f, "x{}", k + 1),
        }
    }
}

/// Fully parenthesized form that re-parses to the same tree.
///
/// `X(0)` prints as `x1`; the claim parser maps `x1` back to `X(0)` only for
/// `d > 1`, so printing is exact for trees produced with `d > 1` and the
/// one-dimensional form is printed by [`Expr::pretty_claim_1d`].
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, false)
    }
}

impl Expr {
    /// Printing for one-dimensional claims, where the terminal value is `x`.
    pub fn pretty_claim_1d(&self) -> String {
        struct P<'a>(&'a Expr);
        impl fmt::Display for P<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.write(f, true)
            }
        }
        P(self).to_string()
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, scalar_x: bool) -> fmt::Result {
        match self {
            Expr::Number(v) => write!(f, "{v:?}"),
            Expr::Var(Var::X(0)) if scalar_x => f.write_str("x"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => {
                f.write_str("-(")?;
                e.write(f, scalar_x)?;
                f.write_str(")")
            }
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => " * ",
                    BinOp::Div => " / ",
                };
                f.write_str("(")?;
                a.write(f, scalar_x)?;
                f.write_str(sym)?;
                b.write(f, scalar_x)?;
                f.write_str(")")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.write(f, scalar_x)?;
                }
                f.write_str(")")
            }
        }
    }
}
