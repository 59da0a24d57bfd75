use thiserror::Error;

use crate::gdsl::ParseError;

/// Failure while evaluating a generator or claim body.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value {value} from {what}")]
    NonFinite { what: String, value: f64 },
    #[error("expected {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("evaluation failed at {at}: {source}")]
    Eval {
        at: String,
        #[source]
        source: EvalError,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time step too large: K*dt = {k_dt} > 0.5; use at least N = {required_steps} steps")]
    StepTooLarge { k_dt: f64, required_steps: usize },

    #[error("fixed-point iteration did not converge at {at} after {iterations} iterations (last |dv| = {last_delta})")]
    NonConvergence {
        at: String,
        iterations: usize,
        last_delta: f64,
    },

    #[error("non-finite intermediate value at {at}")]
    NonFinite { at: String },

    #[error("time index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("generator violates assumption {assumption}: {detail}")]
    Assumption { assumption: &'static str, detail: String },

    #[error("cannot allocate {requested} values ({detail})")]
    Resource { requested: usize, detail: String },

    #[error("operator and generator routes disagree: {0}")]
    RouteMismatch(String),

    #[error("instance {instance}: {source}")]
    Instance {
        instance: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn eval(at: impl Into<String>, source: EvalError) -> Self {
        Error::Eval {
            at: at.into(),
            source,
        }
    }

    pub(crate) fn instance(instance: impl Into<String>, source: Error) -> Self {
        Error::Instance {
            instance: instance.into(),
            source: Box::new(source),
        }
    }

    /// Numeric failures as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        if let Error::Instance { source, .. } = self {
            return source.is_numeric();
        }
        matches!(
            self,
            Error::Eval { .. }
                | Error::NonConvergence { .. }
                | Error::NonFinite { .. }
                | Error::Resource { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
