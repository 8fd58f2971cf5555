use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed IDX data at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset is not linearly separable")]
    NotSeparable,

    #[error("smallest margin {0:.3e} is not positive; the network does not separate the data yet")]
    NonPositiveMargin(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
