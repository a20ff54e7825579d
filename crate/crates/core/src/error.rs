use thiserror::Error;

/// Errors raised by map construction, measure handling and the estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain gap: no branch contains x = {0}")]
    DomainGap(f64),
    #[error("root finding did not reach tolerance {tol:e} after {iterations} iterations")]
    Convergence { tol: f64, iterations: usize },
    #[error("value outside [0, 1]: {0}")]
    Domain(f64),
    #[error("non-finite result while {0}")]
    NonFinite(String),
    #[error("level {0} exceeds the supported maximum of 24")]
    LevelOverflow(u32),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("refined partition exceeds {limit} cells")]
    CombinatorialBlowup { limit: usize },
    #[error("classification gap: component [{lo}, {hi}) straddles a coarse boundary")]
    ClassificationGap { lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("malformed document: {0}")]
    Document(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable snake-case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DomainGap(_) => "domain_gap",
            Error::Convergence { .. } => "convergence",
            Error::Domain(_) => "domain",
            Error::NonFinite(_) => "non_finite",
            Error::LevelOverflow(_) => "level_overflow",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Precondition(_) => "precondition",
            Error::CombinatorialBlowup { .. } => "combinatorial_blowup",
            Error::ClassificationGap { .. } => "classification_gap",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Constraint(_) => "constraint",
            Error::BudgetExceeded(_) => "budget_exceeded",
            Error::Document(_) => "document",
        }
    }
}
