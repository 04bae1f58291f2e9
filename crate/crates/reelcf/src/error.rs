use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("sequence shorter than filter: {len} frames < filter width {filter_width}")]
    SequenceTooShort { len: usize, filter_width: usize },

    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        actual: String,
    },

    #[error("{path}: bad magic (expected {expected:?})")]
    BadMagic { path: PathBuf, expected: [u8; 4] },

    #[error("{path}: truncated payload (expected {expected} bytes, found {found})")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: non-finite value at element {index}")]
    NonFinite { path: PathBuf, index: usize },

    #[error("{path}: bad header: {detail}")]
    BadHeader { path: PathBuf, detail: String },

    #[error("{path}:{line}: malformed row: {detail}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    BadVersion { expected: u32, found: u32 },

    #[error("checkpoint is missing tensor {0:?}")]
    MissingTensor(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("batch size must be even, got {0}")]
    OddBatchSize(usize),

    #[error("eval pair total must be a positive multiple of 10, got {0}")]
    BadPairTotal(usize),

    #[error("pool {0:?} has no pairs to sample")]
    EmptyPool(&'static str),

    #[error("could not sample a negative movie for user {user:?} after {attempts} attempts")]
    NegativeSamplingStuck { user: String, attempts: usize },

    #[error("AUC needs both classes: {positives} positives, {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },

    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize },

    #[error("no movie vector available for attended movie {0:?}")]
    MissingMovieVector(String),

    #[error("no feature sequence for movie {0:?}")]
    MissingFeatures(String),

    #[error("{what} needs at least {needed} {unit}, got {got}")]
    NotEnoughData {
        what: &'static str,
        needed: usize,
        got: usize,
        unit: &'static str,
    },

    #[error("{0}")]
    Unsupported(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
