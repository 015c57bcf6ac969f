//! tsakit: an evaluation toolkit for target-speaker extraction and
//! anonymization experiments on two-speaker overlapped speech.
//!
//! The crate covers the full loop: synthesizing overlap-controlled mixtures
//! from a source catalog, generating enrollment/trial protocols, driving
//! external model adapters through a file-based contract, and scoring the
//! results (WER, cpWER, tcpWER, DER, EER, SI-SDR) into condition reports.

pub mod assignment;
pub mod der;
pub mod asv;
pub mod formats;
pub mod intervals;
pub mod mixgen;
pub mod model;
pub mod pipeline;
pub mod protocol;
pub mod report;
pub mod signal;
pub mod wer;

pub use model::{
    ActivityEntry, Embedding, MixtureRecord, ScoredTrial, Segment, SourceRef, SpeakerActivity,
    TimedWord, Transcript, Trial, Validate, Violation, Waveform,
};
