//! A small arithmetic language for generators and claims.
//!
//! Generators see `t`, `y`, `z1..zd`; claims see `x` (one dimension) or
//! `x1..xd`, the terminal Brownian position. Literals are the only
//! constants; functions are `abs min max sin cos sqrt exp pos`.

mod expr;
mod lexer;
mod parser;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use expr::{BinOp, Env, Expr, Func, Var};

use crate::model::{Claim, GeneratorSpec};
use crate::scalar::Scalar;

/// Maximum depth of a parsed tree.
pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Context {
    Generator { dim: usize },
    Claim { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedChar(char),
    InvalidNumber(String),
    Unexpected {
        found: String,
        expected: Vec<&'static str>,
    },
    UnknownIdentifier(String),
    UnknownFunction(String),
    IndexOutOfRange {
        name: String,
        dim: usize,
    },
    Forbidden {
        name: String,
        context: &'static str,
    },
    Arity {
        func: &'static str,
        got: usize,
    },
    TooDeep(usize),
    InvalidDimension(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub(crate) fn new(offset: usize, kind: ParseErrorKind) -> Self {
        Self { offset, kind }
    }
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => f.write_str("empty expression"),
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::InvalidNumber(s) => write!(f, "invalid number {s:?}"),
            ParseErrorKind::Unexpected { found, expected } => {
                write!(f, "found {found}, expected one of {}", expected.join(", "))
            }
            ParseErrorKind::UnknownIdentifier(s) => write!(f, "unknown identifier {s}"),
            ParseErrorKind::UnknownFunction(s) => write!(f, "unknown function {s}"),
            ParseErrorKind::IndexOutOfRange { name, dim } => {
                write!(f, "{name} is out of range for dimension {dim}")
            }
            ParseErrorKind::Forbidden { name, context } => {
                write!(f, "variable {name} is not allowed in a {context} expression")
            }
            ParseErrorKind::Arity { func, got } => write!(f, "{func} cannot take {got} argument(s)"),
            ParseErrorKind::TooDeep(d) => write!(f, "expression nesting {d} exceeds {MAX_DEPTH}"),
            ParseErrorKind::InvalidDimension(d) => write!(f, "dimension must be at least 1, got {d}"),
        }
    }
}

pub fn parse_expr(src: &str, ctx: Context) -> Result<Expr, ParseError> {
    let dim = match ctx {
        Context::Generator { dim } | Context::Claim { dim } => dim,
    };
    if dim == 0 {
        return Err(ParseError::new(0, ParseErrorKind::InvalidDimension(dim)));
    }
    parser::Parser::new(src, ctx)?.parse()
}

/// Parses a generator body. The Lipschitz constant is left at zero; declare
/// it with [`GeneratorSpec::with_lipschitz`].
pub fn parse_generator<S: Scalar>(src: &str, dim: usize) -> Result<GeneratorSpec<S>, ParseError> {
    let expr = Arc::new(parse_expr(src, Context::Generator { dim })?);
    Ok(GeneratorSpec::new(dim, S::zero(), src.trim(), move |t, y, z| {
        expr.eval(&Env::generator(t, y, z))
    }))
}

/// Parses a terminal claim `phi(B_T)`.
pub fn parse_claim<S: Scalar>(src: &str, dim: usize) -> Result<Claim<S>, ParseError> {
    let expr = Arc::new(parse_expr(src, Context::Claim { dim })?);
    Ok(Claim::terminal(dim, src.trim(), move |x| expr.eval(&Env::claim(x))))
}
