//! Extraction, anonymization, and recombination over a mixture dataset.
//!
//! Models stay outside the toolkit: every model is an adapter, either an
//! executable invoked per file or a built-in oracle/stub. A run walks the
//! manifest, drives each mixture through
//! extracted -> anonymized -> residual -> recombined, transcribes and
//! embeds the stage audio, and writes one evaluation bundle:
//!
//! ```text
//! bundle/
//!   stages/<stage>/<mixture_id>.wav
//!   transcripts/<stage>/<mixture_id>.seglst
//!   diarization/<stage>/<mixture_id>.rttm
//!   embeddings/<stage>/<mixture_id>.txt
//!   embeddings/enrollment/<utterance_id>.txt
//!   scores/<stage>/ov<tag>.{trials,scores}.txt
//!   metrics/<stage>_<metric>.json
//!   logs/<adapter_id>/<key>.log
//!   failures.json
//! ```
//!
//! Mixture failures are isolated: a failing adapter call records one entry
//! in `failures.json` and the rest of the run completes. Chains are
//! content-addressed by their input hashes, so reruns over an existing
//! bundle skip finished work byte-for-byte.

mod adapter;
mod attack;
mod builtins;
mod eval;
mod run;
mod stages;

pub use adapter::{builtin_ids, AdapterIo, AdapterKind, AdapterSet, AdapterSpec, Builtin};
pub use attack::{attack_label, run_attack, AttackSummary};
pub use builtins::{hash_embedding, stub_anonymize, OracleCtx, HASH_EMBEDDING_DIM};
pub use eval::MetricFile;
pub use run::{run_dataset, FailureRecord, Roles, RunConfig, RunInputs, RunSummary, WORKERS_ENV};
pub use stages::{
    compute_residual, recombine, run_anonymizer, run_tse, AdapterCall,
    DURATION_DRIFT_LIMIT_PERCENT,
};

use crate::formats::FormatError;

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("adapter {id}: {message}")]
    Config { id: String, message: String },
    #[error("adapter {id} exited with {status}: {stderr_tail}")]
    AdapterFailed { id: String, status: String, stderr_tail: String },
    #[error("adapter {id} timed out after {seconds}s")]
    Timeout { id: String, seconds: u64 },
    #[error("adapter {id} wrote no readable output: {message}")]
    BadOutput { id: String, message: String },
    #[error("{stage} audio has sample rate {got}, expected {want}")]
    WrongRate { stage: &'static str, got: u32, want: u32 },
    #[error("anonymizer changed duration by {percent:.2}%, limit is {limit}%")]
    DurationDrift { percent: f64, limit: f64 },
    #[error("{0}")]
    Protocol(#[from] crate::protocol::ProtocolError),
    #[error("{0}")]
    Asv(#[from] crate::asv::AsvError),
    #[error("{0}")]
    Signal(#[from] crate::signal::SignalError),
    #[error("{0}")]
    Der(#[from] crate::der::DerError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("injected failure for {0}")]
    Injected(String),
    #[error("{0}")]
    Invalid(String),
}

/// Artifact kinds a mixture produces, in chain order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Original,
    Extracted,
    Anonymized,
    Residual,
    Recombined,
    AttackExtracted,
}

impl Stage {
    pub fn dir_name(&self) -> &'static str {
        match self {
            Stage::Original => "original",
            Stage::Extracted => "extracted",
            Stage::Anonymized => "anonymized",
            Stage::Residual => "residual",
            Stage::Recombined => "recombined",
            Stage::AttackExtracted => "attack_extracted",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.dir_name())
    }
}

pub use crate::mixgen::{condition_percent, condition_tag};
