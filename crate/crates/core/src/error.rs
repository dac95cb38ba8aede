use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("unsupported dimension {0} (expected {1})")]
    UnsupportedDimension(usize, &'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degree mismatch: current has degree {current}, form has degree {form}")]
    DegreeMismatch { current: usize, form: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },

    #[error("value overflows double precision: {0}")]
    Overflow(String),

    #[error("matrix is not positive definite at {at:?} (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { at: Vec<f64>, min_eigenvalue: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error(
        "input is not invariant under the group: residual {residual:e} > tolerance {tolerance:e}"
    )]
    NotInvariant { residual: f64, tolerance: f64 },

    #[error("group does not act by isometries: residual {residual:e} > tolerance {tolerance:e}")]
    NotIsometry { residual: f64, tolerance: f64 },

    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("no epsilon in [{min:e}, {max:e}] satisfies the bound {bound:e} (best deviation {achieved:e})")]
    EpsilonNotFound {
        min: f64,
        max: f64,
        bound: f64,
        achieved: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for numerical aborts.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
