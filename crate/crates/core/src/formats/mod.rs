//! Readers and writers for the on-disk formats the toolkit exchanges:
//! segment-list transcripts, RTTM activity, WAV audio, trial lists, score
//! files, embedding tables, and the mixture manifest.
//!
//! Parsers are strict: every malformed input maps to a [`FormatError`] that
//! names the offending line or field.

mod embeddings;
mod manifest;
mod rttm;
mod seglst;
mod trials;
mod wav;

pub use embeddings::{parse_embeddings, write_embeddings};
pub use manifest::{
    read_catalog, read_manifest, write_manifest, Catalog, CatalogEntry, Manifest,
};
pub use rttm::{parse_rttm, write_rttm};
pub use seglst::{parse_seglst, write_seglst};
pub use trials::{parse_scores, parse_trials, write_scores, write_trials};
pub use wav::{read_wav, write_wav};

pub type Result<T> = std::result::Result<T, FormatError>;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed JSON @ line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("missing key: {key} @ line {line}")]
    MissingKey { key: String, line: usize },
    #[error("invalid {what} @ line {line}: {message}")]
    Invalid { what: String, line: usize, message: String },
    #[error("malformed line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{path}: {message}")]
    Wav { path: String, message: String },
    #[error("score join: {0}")]
    ScoreJoin(String),
    #[error("{0}")]
    Document(String),
}

impl FormatError {
    pub(crate) fn invalid(what: &str, line: usize, message: impl Into<String>) -> Self {
        FormatError::Invalid { what: what.into(), line, message: message.into() }
    }
}
