use std::path::PathBuf;

/// Errors produced anywhere in the aperture-forge pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration (array sizes, ranges, CFAR windows, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// The input carries no usable signal, e.g. an all-zero snapshot.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A matrix that has to be inverted is (numerically) singular.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// NaN/inf produced or received where finite numbers are required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Malformed dataset/model/cube file.
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 3,
            Error::Degenerate(_) | Error::Singular(_) | Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
