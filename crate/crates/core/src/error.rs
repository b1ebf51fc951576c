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

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("configuration: {0}")]
    Config(String),

    #[error("required column `{0}` not found in CSV header")]
    MissingColumn(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("dataset has {0} comments; at least 3 are needed to populate train, dev and test")]
    DatasetTooSmall(usize),

    #[error("comments without a gold label: {}", .0.join(", "))]
    MissingLabels(Vec<String>),

    #[error("duplicate vocabulary token `{token}` on lines {first_line} and {second_line}")]
    DuplicateToken {
        token: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("vocabulary is missing the special token {0}")]
    MissingSpecial(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sequence length {len} exceeds positional capacity {capacity}")]
    SequenceTooLong { len: usize, capacity: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("not found: {0}")]
    NotFound(String),

    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("annotators `{0}` and `{1}` have zero overlapping labeled comments")]
    NoOverlap(String, String),

    #[error("missing weight files under {dir}: {missing}. Expected layout: {layout}")]
    MissingWeights {
        dir: PathBuf,
        missing: String,
        layout: &'static str,
    },

    #[error("model was trained for the {model} pipeline but {requested} was requested")]
    LanguageMismatch { model: String, requested: String },

    #[error("{}:{line}: {message}", path.display())]
    ProjectFile { path: PathBuf, line: usize, message: String },

    #[error("weights: {0}")]
    Weights(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
