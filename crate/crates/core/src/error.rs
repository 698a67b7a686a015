use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("bad IDX magic {found:#010x} at offset 0 (expected {expected:#010x})")]
    BadMagic { expected: u32, found: u32 },

    #[error(
        "truncated data at offset {offset}: needed {needed} more bytes, {available} available"
    )]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("image dimensions {rows}x{cols} at offset 8 do not match expected {expected_rows}x{expected_cols}")]
    ImageDims {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("{extra} unexpected trailing bytes after offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },

    #[error("corrupt label {label} at offset {offset} (must be < {classes})")]
    BadLabel {
        label: u8,
        offset: usize,
        classes: usize,
    },

    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("shape mismatch in {op}: expected {expected}, got {found}")]
    Shape {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid loop nest `{nest}`: {reason}")]
    Nest { nest: String, reason: String },

    #[error("array `{0}` is accessed but has no partition spec")]
    Unpartitioned(String),

    #[error("Adam step counter must be >= 1 when computing bias correction")]
    ZeroStep,

    #[error("pipeline stage failed: {0}")]
    Stage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(
        op: &'static str,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
