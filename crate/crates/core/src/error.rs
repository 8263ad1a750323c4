use thiserror::Error;

/// Errors produced by the array model, the solver and the correction loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The pattern vanishes at broadside, so dB values relative to `F(0)` are undefined.
    #[error("array factor is zero at broadside")]
    DegenerateBroadside,

    #[error("normalized pattern is below {threshold_db} dB at broadside; no mainlobe")]
    NoMainlobe { threshold_db: f64 },

    #[error("angular region is empty")]
    EmptyRegion,

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    /// No correction meeting the metric target was found.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("subset budget of {limit} inner solves exceeded")]
    BudgetExceeded { limit: u64 },
}

impl Error {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
