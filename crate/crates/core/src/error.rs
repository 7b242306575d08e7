use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unexpected end of stream")]
    UnexpectedEof,
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("degenerate histogram")]
    DegenerateHistogram,
    #[error("empty mask")]
    EmptyMask,
    #[error("mask eliminated by morphology")]
    MaskEliminated,
    #[error("nothing survives pruning")]
    NothingSurvives,
    #[error("empty region")]
    EmptyRegion,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("solver did not converge after {0} iterations")]
    NotConverged(usize),
    #[error("degenerate fold {0}: training set contains a single class")]
    DegenerateFold(usize),
    #[error("too few groups: need {needed}, have {have}")]
    TooFewGroups { needed: usize, have: usize },
    #[error("manifest.csv not found in {0}")]
    ManifestNotFound(PathBuf),
    #[error("stage {stage} failed on case {case}: {source}")]
    Stage {
        stage: &'static str,
        case: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_stage(self, stage: &'static str, case: usize) -> Self {
        Error::Stage {
            stage,
            case,
            source: Box::new(self),
        }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
