use num_complex::Complex64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    /// The point lies where the requested transform is not defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("inversion failed after {iterations} iterations: last iterate {last}, residual {residual:e}")]
    InversionFailure {
        last: Complex64,
        residual: f64,
        iterations: usize,
    },

    #[error("support coverage error: recovered mass {mass} outside [0.99, 1.01]; widen the contour grid")]
    SupportCoverage { mass: f64 },

    #[error("branch error: {0}")]
    Branch(String),

    #[error("{stage} failed at z = {z}: {source}")]
    Pipeline {
        stage: &'static str,
        z: Complex64,
        #[source]
        source: Box<Error>,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Domain(_) | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
