use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid sparsity level {s} for dimension {dim}")]
    InvalidSparsity { s: usize, dim: usize },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("shrinkage function returned {value} at t = {t}, outside [0, 1]")]
    ShrinkOutOfRange { t: f64, value: f64 },

    #[error("root of the shrinkage equation not bracketed at t = {t}")]
    RootNotBracketed { t: f64 },

    #[error("degenerate witness: y equals the thresholded point")]
    DegenerateWitness,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry})")]
    NotSymmetric { asymmetry: f64 },

    #[error("spectrum [{min_eig}, {max_eig}] not inside certified bounds [{alpha}, {beta}]")]
    SpectrumViolation {
        min_eig: f64,
        max_eig: f64,
        alpha: f64,
        beta: f64,
    },

    #[error("invalid concavity query: {0}")]
    InvalidQuery(String),

    #[error("bound inapplicable: gamma = {gamma} >= 1/(2 kappa) = {limit}")]
    ContractViolation { gamma: f64, limit: f64 },

    #[error("no trap: best concavity ratio found {found} <= 1/(2 kappa) + margin = {needed}")]
    ConcavityTooSmall { found: f64, needed: f64 },

    #[error("vector is not dense: entry {index} is zero")]
    NotDense { index: usize },

    #[error("singular value decomposition failed")]
    SvdFailure,

    #[error("infeasible design spec: {0}")]
    InfeasibleSpec(String),

    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;
