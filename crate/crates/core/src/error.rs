use thiserror::Error;

use crate::lasso::LassoSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "coordinate descent did not converge after {sweeps} sweeps (max change {max_change:e})"
    )]
    MaxSweepsExceeded {
        sweeps: usize,
        max_change: f64,
        best: Box<LassoSolution>,
    },

    #[error("degenerate breakpoint near lambda = {lambda:e}: events for columns {indices:?} coincide (Generic Condition violation suspected)")]
    DegenerateBreakpoint { lambda: f64, indices: Vec<usize> },

    #[error("lambda = {lambda:e} is outside the computed path range [{lo:e}, +inf)")]
    LambdaOutOfRange { lambda: f64, lo: f64 },

    #[error("residual vanishes at lambda = {0:e}")]
    ZeroResidual(f64),

    #[error("singular submatrix on columns {0:?}")]
    SingularSubmatrix(Vec<usize>),

    #[error(
        "target value {target:e} is not attained on the path; attainable range is [{lo:e}, {hi:e}]"
    )]
    RootNotAttainable { target: f64, lo: f64, hi: f64 },

    #[error("lambda = {0:e} is a breakpoint of the path; derivative undefined")]
    AtBreakpoint(f64),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::MaxSweepsExceeded { .. }
                | Error::DegenerateBreakpoint { .. }
                | Error::ZeroResidual(_)
                | Error::SingularSubmatrix(_)
                | Error::RootNotAttainable { .. }
                | Error::AtBreakpoint(_)
                | Error::NoConvergence { .. }
        )
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::MaxSweepsExceeded { .. } => "max_sweeps_exceeded",
            Error::DegenerateBreakpoint { .. } => "degenerate_breakpoint",
            Error::LambdaOutOfRange { .. } => "lambda_out_of_range",
            Error::ZeroResidual(_) => "zero_residual",
            Error::SingularSubmatrix(_) => "singular_submatrix",
            Error::RootNotAttainable { .. } => "root_not_attainable",
            Error::AtBreakpoint(_) => "at_breakpoint",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
