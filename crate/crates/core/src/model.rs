//! Core data model shared by every metric and pipeline stage.
//!
//! All times are seconds as `f64`. Speaker and utterance identifiers are
//! opaque strings. Construction never validates; [`Validate::validate`]
//! reports rule violations without aborting, so callers decide what is fatal.

use serde::{Deserialize, Serialize};

use crate::intervals;

/// Canonical sample rate for synthesized audio.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

/// Amplitude headroom for in-memory audio; clipping happens only on WAV write.
pub const AMPLITUDE_LIMIT: f64 = 4.0;

/// Slack allowed when checking that word intervals lie inside their segment.
pub const WORD_BOUNDS_EPS: f64 = 0.01;

/// Trial label accepting a genuine enrollment/test speaker match.
pub const LABEL_TARGET: &str = "target";
/// Trial label for an impostor pairing.
pub const LABEL_NONTARGET: &str = "nontarget";

/// One recognized or reference word with its time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedWord {
    pub text: String,
    pub start: f64,
    pub end: f64,
}

impl TimedWord {
    pub fn new(text: impl Into<String>, start: f64, end: f64) -> Self {
        TimedWord { text: text.into(), start, end }
    }
}

/// A contiguous stretch of speech by one speaker within a session.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub session_id: String,
    pub speaker_id: String,
    pub start: f64,
    pub end: f64,
    pub words: Vec<TimedWord>,
}

impl Segment {
    /// Segment whose words all carry the segment's own interval; word-level
    /// times come later via pseudo-timestamping when a metric needs them.
    pub fn with_text(
        session_id: impl Into<String>,
        speaker_id: impl Into<String>,
        start: f64,
        end: f64,
        text: &str,
    ) -> Self {
        Segment {
            session_id: session_id.into(),
            speaker_id: speaker_id.into(),
            start,
            end,
            words: text.split_whitespace().map(|w| TimedWord::new(w, start, end)).collect(),
        }
    }
}

/// All segments of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub session_id: String,
    pub segments: Vec<Segment>,
}

impl Transcript {
    pub fn new(session_id: impl Into<String>) -> Self {
        Transcript { session_id: session_id.into(), segments: Vec::new() }
    }

    /// Speaker ids present, sorted and deduplicated.
    pub fn speakers(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.segments.iter().map(|s| s.speaker_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// One speaker's activity interval inside a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityEntry {
    pub speaker_id: String,
    pub onset: f64,
    pub duration: f64,
}

impl ActivityEntry {
    pub fn new(speaker_id: impl Into<String>, onset: f64, duration: f64) -> Self {
        ActivityEntry { speaker_id: speaker_id.into(), onset, duration }
    }

    pub fn offset(&self) -> f64 {
        self.onset + self.duration
    }
}

/// Who speaks when in a session, as a list of (speaker, onset, duration) entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerActivity {
    pub session_id: String,
    pub entries: Vec<ActivityEntry>,
}

impl SpeakerActivity {
    pub fn new(session_id: impl Into<String>) -> Self {
        SpeakerActivity { session_id: session_id.into(), entries: Vec::new() }
    }

    /// Speaker ids present, sorted and deduplicated.
    pub fn speakers(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.entries.iter().map(|e| e.speaker_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Merged activity intervals of one speaker.
    pub fn speaker_intervals(&self, speaker_id: &str) -> Vec<(f64, f64)> {
        let raw: Vec<(f64, f64)> = self
            .entries
            .iter()
            .filter(|e| e.speaker_id == speaker_id)
            .map(|e| (e.onset, e.offset()))
            .collect();
        intervals::normalize(&raw)
    }
}

/// Mono audio held as doubles; storage format quantization happens at I/O.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Waveform { samples, sample_rate }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// One verification trial: does `test_id` contain the speaker enrolled as `enroll_id`?
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trial {
    pub enroll_id: String,
    pub test_id: String,
    /// Either [`LABEL_TARGET`] or [`LABEL_NONTARGET`]; anything else is a violation.
    pub label: String,
}

impl Trial {
    pub fn target(enroll_id: impl Into<String>, test_id: impl Into<String>) -> Self {
        Trial { enroll_id: enroll_id.into(), test_id: test_id.into(), label: LABEL_TARGET.into() }
    }

    pub fn nontarget(enroll_id: impl Into<String>, test_id: impl Into<String>) -> Self {
        Trial { enroll_id: enroll_id.into(), test_id: test_id.into(), label: LABEL_NONTARGET.into() }
    }

    pub fn is_target(&self) -> bool {
        self.label == LABEL_TARGET
    }
}

/// A trial with the similarity score assigned to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrial {
    pub trial: Trial,
    pub score: f64,
}

/// Fixed-dimension speaker vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub dim: usize,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        let dim = values.len();
        Embedding { values, dim }
    }
}

/// Where one side of a mixture came from and how it was placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    pub utterance_id: String,
    pub speaker_id: String,
    /// Placement of the source within the mixture, seconds from mixture start.
    pub offset: f64,
    /// Linear gain applied to the source.
    pub gain: f64,
}

/// Full provenance of one synthesized two-speaker mixture.
///
/// The target source is always the first speaker of the pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub mixture_id: String,
    pub target_source: SourceRef,
    pub nontarget_source: SourceRef,
    pub overlap_requested: f64,
    pub overlap_measured: f64,
    pub activity: SpeakerActivity,
}

/// A broken invariant on a core type: which field, which rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation { field: field.into(), rule: rule.into() }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Rule checking for core types; returns every violation instead of aborting.
pub trait Validate {
    fn validate(&self) -> Vec<Violation>;
}

fn check_finite(out: &mut Vec<Violation>, field: &str, value: f64) {
    if !value.is_finite() {
        out.push(Violation::new(field, "must be finite"));
    }
}

impl Validate for TimedWord {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_finite(&mut out, "start", self.start);
        check_finite(&mut out, "end", self.end);
        if self.end < self.start {
            out.push(Violation::new("end", "must be >= start"));
        }
        out
    }
}

impl Validate for Segment {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_finite(&mut out, "start", self.start);
        check_finite(&mut out, "end", self.end);
        if self.end < self.start {
            out.push(Violation::new("end", "must be >= start"));
        }
        for (i, w) in self.words.iter().enumerate() {
            for v in w.validate() {
                out.push(Violation::new(format!("words[{i}].{}", v.field), v.rule));
            }
            if w.start < self.start - WORD_BOUNDS_EPS || w.end > self.end + WORD_BOUNDS_EPS {
                out.push(Violation::new(
                    format!("words[{i}]"),
                    "word interval must lie within segment bounds",
                ));
            }
        }
        out
    }
}

impl Validate for Transcript {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.session_id != self.session_id {
                out.push(Violation::new(
                    format!("segments[{i}].session_id"),
                    "must match transcript session_id",
                ));
            }
            for v in seg.validate() {
                out.push(Violation::new(format!("segments[{i}].{}", v.field), v.rule));
            }
        }
        out
    }
}

impl Validate for ActivityEntry {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_finite(&mut out, "onset", self.onset);
        check_finite(&mut out, "duration", self.duration);
        if self.duration.is_nan() || self.duration <= 0.0 {
            out.push(Violation::new("duration", "must be > 0"));
        }
        if self.onset < 0.0 {
            out.push(Violation::new("onset", "must be >= 0"));
        }
        out
    }
}

impl Validate for SpeakerActivity {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            for v in e.validate() {
                out.push(Violation::new(format!("entries[{i}].{}", v.field), v.rule));
            }
        }
        out
    }
}

impl Validate for Waveform {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.sample_rate == 0 {
            out.push(Violation::new("sample_rate", "must be positive"));
        }
        for (i, &s) in self.samples.iter().enumerate() {
            if !s.is_finite() || s.abs() > AMPLITUDE_LIMIT {
                out.push(Violation::new(
                    format!("samples[{i}]"),
                    format!("amplitude must be finite and within [-{AMPLITUDE_LIMIT}, {AMPLITUDE_LIMIT}]"),
                ));
                break; // one violation is enough to flag the buffer
            }
        }
        out
    }
}

impl Validate for Trial {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.enroll_id.is_empty() {
            out.push(Violation::new("enroll_id", "must be non-empty"));
        }
        if self.test_id.is_empty() {
            out.push(Violation::new("test_id", "must be non-empty"));
        }
        if self.label != LABEL_TARGET && self.label != LABEL_NONTARGET {
            out.push(Violation::new(
                "label",
                format!("must be \"{LABEL_TARGET}\" or \"{LABEL_NONTARGET}\""),
            ));
        }
        out
    }
}

impl Validate for ScoredTrial {
    fn validate(&self) -> Vec<Violation> {
        let mut out = self.trial.validate();
        if !self.score.is_finite() {
            out.push(Violation::new("score", "must be finite"));
        }
        out
    }
}

impl Validate for Embedding {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.dim == 0 {
            out.push(Violation::new("dim", "must be positive"));
        }
        if self.values.len() != self.dim {
            out.push(Violation::new("values", "length must equal dim"));
        }
        for (i, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::new(format!("values[{i}]"), "must be finite"));
                break;
            }
        }
        out
    }
}

impl Validate for SourceRef {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.utterance_id.is_empty() {
            out.push(Violation::new("utterance_id", "must be non-empty"));
        }
        if self.speaker_id.is_empty() {
            out.push(Violation::new("speaker_id", "must be non-empty"));
        }
        if self.offset.is_nan() || self.offset < 0.0 {
            out.push(Violation::new("offset", "must be >= 0"));
        }
        if self.gain.is_nan() || self.gain <= 0.0 {
            out.push(Violation::new("gain", "must be > 0"));
        }
        out
    }
}

impl Validate for MixtureRecord {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for v in self.target_source.validate() {
            out.push(Violation::new(format!("target_source.{}", v.field), v.rule));
        }
        for v in self.nontarget_source.validate() {
            out.push(Violation::new(format!("nontarget_source.{}", v.field), v.rule));
        }
        if self.target_source.speaker_id == self.nontarget_source.speaker_id {
            out.push(Violation::new("nontarget_source.speaker_id", "speakers must be distinct"));
        }
        if !(self.overlap_requested > 0.0 && self.overlap_requested <= 1.0) {
            out.push(Violation::new("overlap_requested", "must lie in (0, 1]"));
        }
        if !(self.overlap_measured >= 0.0 && self.overlap_measured <= 1.0) {
            out.push(Violation::new("overlap_measured", "must lie in [0, 1]"));
        }
        for v in self.activity.validate() {
            out.push(Violation::new(format!("activity.{}", v.field), v.rule));
        }
        let speakers = self.activity.speakers();
        if speakers.len() == 2 {
            let a = self.activity.speaker_intervals(&speakers[0]);
            let b = self.activity.speaker_intervals(&speakers[1]);
            let measured = intervals::iou(&a, &b);
            if (measured - self.overlap_measured).abs() > 1e-9 {
                out.push(Violation::new(
                    "overlap_measured",
                    "must match overlap recomputed from activity within 1e-9",
                ));
            }
        } else {
            out.push(Violation::new("activity", "must contain exactly two speakers"));
        }
        out
    }
}
