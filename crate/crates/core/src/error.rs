use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps these onto exit codes: configuration problems exit with 2,
/// data problems with 3 and numerical divergence with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("matrix is singular or rank deficient (|L_{index},{index}| = {value:.3e})")]
    SingularMatrix { index: usize, value: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("degenerate kernel: all aggregate points coincide (median distance = 0)")]
    DegenerateKernel,

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("corrupted file: {0}")]
    Corruption(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Divergence {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("mask optimization failed: {0}")]
    Optimization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI surface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Configuration(_) | Error::DimensionMismatch { .. } => 2,
            Error::Data(_)
            | Error::Format(_)
            | Error::Corruption(_)
            | Error::DegenerateSample(_)
            | Error::DegenerateKernel
            | Error::Io(_) => 3,
            Error::Divergence { .. } | Error::SingularMatrix { .. } | Error::Optimization(_) => 4,
        }
    }
}
