//! Error type shared by all modules.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image has a single gray level ({level}); cannot threshold")]
    DegenerateImage { level: u8 },

    #[error("region of interest is empty")]
    EmptyRoi,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("histogram bin counts differ: {left} vs {right}")]
    BinCountMismatch { left: usize, right: usize },

    #[error("operand must be normalized first")]
    NotNormalized,

    #[error("co-occurrence matrix has no counts")]
    EmptyMatrix,

    #[error("co-occurrence offset (0, 0) is invalid")]
    InvalidOffset,

    #[error("reference set is missing category {0}")]
    MissingCategory(usize),

    #[error("duplicate reference for category {0}")]
    DuplicateCategory(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("need at least {needed} instances, got {got}")]
    TooFewInstances { needed: usize, got: usize },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid manifest: {0}")]
    Validation(String),

    #[error("model format version {found} is newer than supported version {supported}")]
    ModelVersion { found: u32, supported: u32 },

    #[error("failed to read image {path}: {source}")]
    ImageRead {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim_mismatch(lw: usize, lh: usize, rw: usize, rh: usize) -> Self {
        Error::DimensionMismatch {
            left: format!("{lw}x{lh}"),
            right: format!("{rw}x{rh}"),
        }
    }
}
