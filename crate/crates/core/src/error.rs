use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("batch too small: need at least {min} samples, got {got}")]
    BatchTooSmall { min: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Inputs whose shapes disagree with each other.
    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("run `{variant}` with seed {seed} failed: {source}")]
    Run {
        variant: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Strips [`Error::Run`] wrappers down to the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Run { source, .. } => source.root(),
            other => other,
        }
    }
}
