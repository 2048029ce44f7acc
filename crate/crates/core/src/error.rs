use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("map has zero total mass")]
    ZeroMass,

    #[error("point ({x}, {y}) lies outside a {width}x{height} image")]
    Bounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("fixation set is empty")]
    EmptyFixations,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("no evaluable frames under {0}")]
    EmptyDataset(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
