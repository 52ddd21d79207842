use crate::instance::Violation;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {}", join(.0))]
    InvalidInstance(Vec<Violation>),

    #[error("degenerate topology: {0}")]
    DegenerateTopology(String),

    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),

    #[error("point has {got} entries but the model has {expected} columns")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration of size {size} exceeds the oracle limit of {limit}")]
    OracleLimit { size: f64, limit: f64 },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("{0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
