use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DipError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DipError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse {value:?} as a real number")]
    BadCell { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: non-finite value")]
    NonFinite { row: usize, column: String },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("feature index {index} out of range for {n_features} features")]
    InvalidIndex { index: usize, n_features: usize },
    #[error("invalid feature groups: {0}")]
    InvalidGroup(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty data: {0}")]
    EmptyData(&'static str),
    #[error("empty feature scope; use fit_constant for the baseline")]
    EmptyScope,
    #[error("expected a {expected} model, got {actual}")]
    WrongModelKind { expected: &'static str, actual: &'static str },
    #[error("feature `{0}` required by the model is missing from the data")]
    MissingFeature(String),
    #[error("target has zero variance on the evaluation rows")]
    ZeroVariance,
    #[error("exact Shapley enumeration supports at most {max} features, got {d}")]
    DimensionTooLarge { d: usize, max: usize },
}

impl DipError {
    /// Coarse class of the error, used for CLI exit codes.
    pub fn class(&self) -> ErrorClass {
        use DipError::*;
        match self {
            Io { .. } => ErrorClass::Io,
            Csv(_) | MissingColumn(_) | BadCell { .. } | NonFinite { .. } | InvalidDataset(_) => {
                ErrorClass::Parse
            }
            ZeroVariance => ErrorClass::Numerical,
            _ => ErrorClass::Config,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Parse,
    Config,
    Numerical,
}
