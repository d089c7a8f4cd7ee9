use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("trajectory blew up at t = {t}, sample {index} requested")]
    BlownUp { t: f64, index: usize },

    #[error("horizon {requested} not covered (trajectory ends at {covered})")]
    HorizonNotCovered { requested: f64, covered: f64 },

    #[error("boundary tail mass {mass:e} exceeds budget {budget:e} at t = {t}")]
    TailMassExceeded { t: f64, mass: f64, budget: f64 },

    #[error("target is not normalized: norm = {norm}")]
    NotNormalized { norm: f64 },

    #[error("target has a Gaussian profile (delta0 = {delta0:e}); no obstruction")]
    DegenerateTarget { delta0: f64 },

    #[error("empty control set")]
    EmptyControlSet,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// True for errors raised by a numerical guard (tail mass, blow-up, overflow).
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteState { .. }
                | Error::BlownUp { .. }
                | Error::HorizonNotCovered { .. }
                | Error::TailMassExceeded { .. }
        )
    }
}
