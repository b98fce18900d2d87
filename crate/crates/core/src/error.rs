use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} at index {index} is not bipolar (expected -1 or +1)")]
    NotBipolar { index: usize, value: i64 },

    #[error("value {value} at index {index} is not ternary (expected -1, 0 or +1)")]
    NotTernary { index: usize, value: i64 },

    #[error("{what}: dimension mismatch (expected {expected}, got {actual})")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("bit plane of {n_bits} bits has nonzero padding or wrong word count")]
    BadPadding { n_bits: usize },

    #[error("{path}: wrong magic {found:#010x} (expected {expected:#010x})")]
    WrongMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: truncated ({needed} bytes needed, {available} available)")]
    Truncated {
        path: PathBuf,
        needed: usize,
        available: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("label {label} at index {index} is out of range for {classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: u8,
        classes: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot compute a threshold over an empty tensor")]
    EmptyTensor,

    #[error("sparsity must lie in [0, 1), got {0}")]
    InvalidSparsity(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
}

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            actual,
        }
    }
}
