use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("kernel tail mass {tail:e} exceeds tolerance {tol:e}; enlarge the grid")]
    TruncationAliasing { tail: f64, tol: f64 },
    #[error("multiplier is unbounded or not finite on the spectrum (at {at})")]
    UnboundedMultiplier { at: f64 },
    #[error("multiplier support [{lo}, {hi}] violates the required window ({required})")]
    SupportViolation { lo: f64, hi: f64, required: String },
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("level {lambda} is outside the open spectrum (-1, 1)")]
    OutsideSpectrum { lambda: f64 },
    #[error("level {lambda} is within {gap:e} of the critical value {critical}")]
    NearCritical { lambda: f64, critical: f64, gap: f64 },
    #[error("singular node: |grad G| = {grad:e}")]
    SingularNode { grad: f64 },
    #[error("surface too coarse: element size {size:e} exceeds {limit:e}")]
    TooCoarse { size: f64, limit: f64 },
    #[error("partition rejected: {0}")]
    InvalidPartition(String),
    #[error("exponent pair p={p}, q={q} not supported: {reason}")]
    UnsupportedExponents { p: f64, q: f64, reason: String },
    #[error("csv export failed: {0}")]
    Export(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Export(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Export(e.to_string())
    }
}
