use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition.
    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("drift matrix must be square, got {rows}x{cols}")]
    NonSquareDrift { rows: usize, cols: usize },

    #[error("diffusion vector has length {got}, drift matrix has dimension {expected}")]
    DiffusionShape { expected: usize, got: usize },

    #[error(
        "unknown problem `{0}` (expected one of: exp, neg_exp, orbit, van_der_pol, decay_chain)"
    )]
    UnknownProblem(String),

    /// Innovation variance vanished while the residual did not: the exact
    /// measurement contradicts the prediction.
    #[error("filter diverged at step {step} (t = {t}): innovation variance {s:e} with residual {residual:e}")]
    FilterDivergence {
        step: usize,
        t: f64,
        s: f64,
        residual: f64,
    },

    #[error("non-finite vector field value at t = {t} for input {input:?}")]
    NonFiniteField { t: f64, input: Vec<f64> },

    #[error("reference integration produced a non-finite state at t = {t}")]
    NonFiniteReference { t: f64 },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("problem `{0}` has no analytic solution available")]
    NoAnalyticSolution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the error stems from bad input rather than a numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::NonSquareDrift { .. }
                | Error::DiffusionShape { .. }
                | Error::UnknownProblem(_)
                | Error::NoAnalyticSolution(_)
        )
    }
}
