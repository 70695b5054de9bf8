use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("group element family does not match the monomorphism ({expected} expected)")]
    FamilyMismatch { expected: &'static str },

    #[error("integer matrix is singular (determinant 0)")]
    SingularMatrix,

    #[error("kernel is indefinite: min eigenvalue {min_eigenvalue:e} below -{tolerance:e}")]
    IndefiniteKernel { min_eigenvalue: f64, tolerance: f64 },

    #[error("{what}: residual {residual:e} exceeds {tolerance:e}")]
    RelationViolation {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("block leakage at level {level}: {leakage:e} exceeds {tolerance:e} (window too small?)")]
    BlockLeakage {
        level: i64,
        leakage: f64,
        tolerance: f64,
    },

    #[error("alpha-root failure at level {level}: {detail}")]
    AlphaRootFailure { level: i64, detail: String },

    #[error("matrices do not commute: commutator norm {residual:e} exceeds {tolerance:e}")]
    CommutationViolation { residual: f64, tolerance: f64 },

    #[error("matrix is not unitary: defect {defect:e}")]
    NonUnitary { defect: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this failure: 1 check failure, 2 invalid input,
    /// 3 internal numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IndefiniteKernel { .. }
            | Error::RelationViolation { .. }
            | Error::BlockLeakage { .. }
            | Error::AlphaRootFailure { .. }
            | Error::CommutationViolation { .. } => 1,
            Error::InvalidArgument(_)
            | Error::FamilyMismatch { .. }
            | Error::SingularMatrix
            | Error::NonUnitary { .. }
            | Error::Parse(_)
            | Error::Io { .. } => 2,
            Error::Numerical(_) => 3,
        }
    }
}
