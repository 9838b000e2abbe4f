use thiserror::Error;

/// Errors raised by the numerical kernels, the estimators and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is singular (pivot {pivot:e})")]
    Singular { pivot: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("matrix is not stable (spectral radius {rho})")]
    UnstableInput { rho: f64 },

    #[error("closed loop is not stable (spectral radius {rho})")]
    ClosedLoopUnstable { rho: f64 },

    #[error("eigenvector basis is numerically singular (condition estimate {condition:e})")]
    DefectiveMatrix { condition: f64 },

    #[error("rate sequence not monotone in delta: {0}")]
    MonotonicityViolation(String),

    #[error("projection structure violated: {0}")]
    StructureViolation(String),

    #[error("Gram matrix is singular (min eigenvalue {min_eig:e})")]
    SingularGram { min_eig: f64 },

    #[error("trajectory too short: {0}")]
    TooShort(String),

    #[error("oversampling exhausted: accepted {accepted} of {requested} after {attempts} candidates")]
    OversamplingExhausted {
        accepted: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("rejection cap exceeded after {attempts} draws: {hint}")]
    RejectionCapExceeded { attempts: usize, hint: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical routines, as opposed to bad input
    /// files or configuration.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Parse(_) | Error::Config(_) | Error::Io(_))
    }

    /// Short machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NotSquare { .. } => "not_square",
            Error::NonFinite { .. } => "non_finite",
            Error::Singular { .. } => "singular",
            Error::NotSpd(_) => "not_spd",
            Error::NoConvergence { .. } => "no_convergence",
            Error::UnstableInput { .. } => "unstable_input",
            Error::ClosedLoopUnstable { .. } => "closed_loop_unstable",
            Error::DefectiveMatrix { .. } => "defective_matrix",
            Error::MonotonicityViolation(_) => "monotonicity_violation",
            Error::StructureViolation(_) => "structure_violation",
            Error::SingularGram { .. } => "singular_gram",
            Error::TooShort(_) => "too_short",
            Error::OversamplingExhausted { .. } => "oversampling_exhausted",
            Error::RejectionCapExceeded { .. } => "rejection_cap_exceeded",
            Error::Parse(_) => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
