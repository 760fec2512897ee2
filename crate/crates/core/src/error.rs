use std::path::PathBuf;

use thiserror::Error;

use crate::multiarray::ModeKind;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum DadlError {
    #[error("grid lacks mode {0:?}")]
    ModeMismatch(ModeKind),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is numerically singular (condition estimate {0:.3e})")]
    SingularMatrix(f64),
    #[error("dictionary column {column} has norm {norm}, expected 1")]
    NonNormalizedDictionary { column: usize, norm: f64 },
    #[error("training grid is incomplete: {0}")]
    IncompleteGrid(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown {kind} label {label:?}")]
    UnknownLabel { kind: &'static str, label: String },
    #[error("no enrolled codes to match against")]
    EmptyGallery,
    #[error("protocol has no probes")]
    EmptyProtocol,
    #[error("group {group} has {count} samples, need at least 2")]
    InsufficientSamples { group: usize, count: usize },
    #[error("exhaustive search over {0} supports exceeds the limit")]
    TooLarge(u128),
    #[error("manifest has no image for subject {subject:?}, pose {pose:?}, illumination {illum:?}")]
    MissingCell {
        subject: String,
        pose: String,
        illum: String,
    },
    #[error("manifest row {row} duplicates cell ({subject}, {pose}, {illum})")]
    DuplicateCell {
        row: usize,
        subject: String,
        pose: String,
        illum: String,
    },
    #[error("corrupt image {path}: {reason}")]
    CorruptImage { path: PathBuf, reason: String },
    #[error("inconsistent image dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("malformed manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("malformed model file: {0}")]
    ModelFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numerical,
}

impl DadlError {
    pub fn class(&self) -> ErrorClass {
        match self {
            DadlError::SingularMatrix(_) | DadlError::NonNormalizedDictionary { .. } => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Data,
        }
    }

    /// Stable identifier for machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            DadlError::ModeMismatch(_) => "ModeMismatch",
            DadlError::DimensionMismatch(_) => "DimensionMismatch",
            DadlError::SingularMatrix(_) => "SingularMatrix",
            DadlError::NonNormalizedDictionary { .. } => "NonNormalizedDictionary",
            DadlError::IncompleteGrid(_) => "IncompleteGrid",
            DadlError::Config(_) => "ConfigError",
            DadlError::UnknownLabel { .. } => "UnknownLabel",
            DadlError::EmptyGallery => "EmptyGallery",
            DadlError::EmptyProtocol => "EmptyProtocol",
            DadlError::InsufficientSamples { .. } => "InsufficientSamples",
            DadlError::TooLarge(_) => "TooLarge",
            DadlError::MissingCell { .. } => "MissingCell",
            DadlError::DuplicateCell { .. } => "DuplicateCell",
            DadlError::CorruptImage { .. } => "CorruptImage",
            DadlError::InconsistentDimensions(_) => "InconsistentDimensions",
            DadlError::Manifest { .. } => "ManifestError",
            DadlError::ModelFormat(_) => "ModelFormat",
            DadlError::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DadlError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, DadlError>;
