use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("i/o error on {path}: {source}")]
    IoPath {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("unsupported sample rate {0} Hz (only 2500000 Hz is supported)")]
    UnsupportedSampleRate(u64),

    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid generator parameters: {0}")]
    InvalidSpec(String),

    #[error("chunk size must be at least one sample")]
    ZeroChunkSize,
}

pub type Result<T> = std::result::Result<T, Error>;
