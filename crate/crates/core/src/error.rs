use thiserror::Error;

/// Errors produced by grid construction, decomposition and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid 1D node (level {level}, index {index})")]
    InvalidNode { level: u8, index: u32 },

    #[error("point {point:?} lies outside the domain box")]
    OutOfDomain { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("missing values: expected {expected} entries, got {got}")]
    MissingValues { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bisection bracket does not contain a root: f({lo}) and f({hi}) share a sign")]
    Bracket { lo: f64, hi: f64 },

    #[error("point solve failed at state {state:?} (last residual norm {residual_norm:e})")]
    PointSolve { state: Vec<f64>, residual_norm: f64 },

    #[error(
        "Blanchard-Kahn condition violated: {stable} stable and {unstable} unstable roots, {required} stable required"
    )]
    BlanchardKahn {
        stable: usize,
        unstable: usize,
        required: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
