use thiserror::Error;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes surfaced by estimation, simulation and ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis mismatch: operands live in different function spaces")]
    BasisMismatch,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("ill-conditioned scalar block: rcond {rcond:.3e} below threshold")]
    IllConditioned { rcond: f64 },

    #[error("operator is not symmetric: max deviation {deviation:.3e}")]
    Asymmetric { deviation: f64 },

    #[error("degenerate cutoff: tau {tau:.3e} exceeds the leading squared eigenvalue {leading:.3e}")]
    DegenerateCutoff { tau: f64, leading: f64 },

    #[error("degenerate eigengap: no positive gap among the leading eigenvalues")]
    DegenerateGap,

    #[error("degenerate variance: psi {psi:.3e} at point estimate {point:.6e}")]
    DegenerateVariance { point: f64, psi: f64 },

    #[error("invalid bandwidth {bandwidth} for sample size {t}")]
    InvalidBandwidth { bandwidth: usize, t: usize },

    #[error("horizon {h} leaves {remaining} aligned observations")]
    HorizonOutOfRange { h: usize, remaining: usize },

    #[error("weak instrument: {0}")]
    WeakInstrument(String),

    #[error("singular structure: 1 - b12 b21 = {schur:.3e}")]
    SingularStructure { schur: f64 },

    #[error("identification failure: {0}")]
    IdentificationFailure(String),

    #[error("monte carlo aborted: {failed} of {reps} replications failed")]
    TooManyFailures { failed: usize, reps: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Broad classification used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidArgument(_) | BasisMismatch | InvalidBandwidth { .. } => ErrorClass::Usage,
            DimensionMismatch { .. }
            | InsufficientData { .. }
            | HorizonOutOfRange { .. }
            | Data(_)
            | Io(_)
            | Csv(_) => ErrorClass::Data,
            IllConditioned { .. }
            | Asymmetric { .. }
            | DegenerateCutoff { .. }
            | DegenerateGap
            | DegenerateVariance { .. }
            | WeakInstrument(_)
            | SingularStructure { .. }
            | IdentificationFailure(_)
            | TooManyFailures { .. } => ErrorClass::Numerical,
        }
    }

    /// Short kebab-case tag for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        use Error::*;
        match self {
            InvalidArgument(_) => "invalid-argument",
            BasisMismatch => "basis-mismatch",
            DimensionMismatch { .. } => "dimension-mismatch",
            InsufficientData { .. } => "insufficient-data",
            IllConditioned { .. } => "ill-conditioned",
            Asymmetric { .. } => "asymmetric",
            DegenerateCutoff { .. } => "degenerate-cutoff",
            DegenerateGap => "degenerate-gap",
            DegenerateVariance { .. } => "degenerate-variance",
            InvalidBandwidth { .. } => "invalid-bandwidth",
            HorizonOutOfRange { .. } => "horizon-out-of-range",
            WeakInstrument(_) => "weak-instrument",
            SingularStructure { .. } => "singular-structure",
            IdentificationFailure(_) => "identification-failure",
            TooManyFailures { .. } => "too-many-failures",
            Data(_) => "data",
            Io(_) => "io",
            Csv(_) => "csv",
        }
    }
}
