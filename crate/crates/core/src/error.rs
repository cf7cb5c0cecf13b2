use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("dimension {dim} exceeds the configured limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },
    #[error("index {index} out of range (< {bound} required)")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("squeezing |r| = {r} exceeds the cap r_max = {r_max}")]
    SqueezingCap { r: f64, r_max: f64 },
    #[error("state leakage {leakage:.3e} exceeds threshold {threshold:.3e}")]
    Leakage { leakage: f64, threshold: f64 },
    #[error("state has zero norm/trace")]
    ZeroTrace,
    #[error("target value {index} is zero; normalized errors are undefined")]
    ZeroTarget { index: usize },
    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("mean photon number {target} not attainable; attainable range is [{lo}, {hi})")]
    Unattainable { target: f64, lo: f64, hi: f64 },
    #[error("matrix logarithm branch is ambiguous (eigenvalue near -1)")]
    LogBranch,
    #[error("no precision plateau detected in the noise sweep")]
    NoPlateau,
    #[error("linear algebra failure: {0}")]
    Linalg(&'static str),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
