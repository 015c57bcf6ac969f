//! Word-error-rate metrics over multi-speaker transcripts.
//!
//! Three variants share one dynamic program:
//! * [`word_error_rate`]: plain Levenshtein WER over two token sequences.
//! * [`cp_wer`]: concatenated-stream WER minimized over all ref/hyp speaker
//!   assignments (solved exactly, not greedily).
//! * [`tcp_wer`]: like cpWER, but a reference and hypothesis word may align
//!   only when the collar-extended reference interval intersects the raw
//!   hypothesis interval; inadmissible pairs decay to deletion+insertion.
//!
//! Among alignments with minimal total errors, the one with the fewest
//! substitutions is reported; insertion and deletion counts then follow from
//! the sequence lengths.

use std::collections::BTreeMap;

use crate::assignment;
use crate::model::{Segment, TimedWord, Transcript};

/// Default tcpWER collar, seconds.
pub const DEFAULT_COLLAR: f64 = 5.0;

/// Token normalization applied identically to reference and hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Strip `.,!?;:` from token edges, then lowercase. Tokens that become
    /// empty are dropped.
    #[default]
    LowercaseStripPunct,
    /// Compare tokens exactly as given.
    Off,
}

impl Normalization {
    pub fn apply(&self, token: &str) -> Option<String> {
        match self {
            Normalization::Off => Some(token.to_string()),
            Normalization::LowercaseStripPunct => {
                let t = token.trim_matches(|c| matches!(c, '.' | ',' | '!' | '?' | ';' | ':'));
                if t.is_empty() {
                    None
                } else {
                    Some(t.to_lowercase())
                }
            }
        }
    }
}

/// Error counts of one scored comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WerStats {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_length: usize,
}

impl WerStats {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// (S+I+D)/N; 0 for an empty comparison, +inf when errors exist against
    /// an empty reference.
    pub fn rate(&self) -> f64 {
        if self.ref_length == 0 {
            if self.errors() == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.errors() as f64 / self.ref_length as f64
        }
    }

    pub fn accumulate(&mut self, other: &WerStats) {
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.ref_length += other.ref_length;
    }
}

/// Fold per-session stats into one pooled count.
pub fn sum_stats<'a>(stats: impl IntoIterator<Item = &'a WerStats>) -> WerStats {
    let mut total = WerStats::default();
    for s in stats {
        total.accumulate(s);
    }
    total
}

/// Minimal (errors, substitutions) between two sequences, where position
/// pairs may align only when `admit` allows it. Lexicographic order on the
/// pair makes the substitution count minimal among co-optimal alignments.
fn lev_counts<T: PartialEq>(
    r: &[T],
    h: &[T],
    mut admit: impl FnMut(usize, usize) -> bool,
) -> (usize, usize) {
    let m = h.len();
    let mut prev: Vec<(usize, usize)> = (0..=m).map(|j| (j, 0)).collect();
    let mut cur = vec![(0usize, 0usize); m + 1];
    for i in 1..=r.len() {
        cur[0] = (i, 0);
        for j in 1..=m {
            let mut best = (prev[j].0 + 1, prev[j].1); // deletion
            let ins = (cur[j - 1].0 + 1, cur[j - 1].1);
            if ins < best {
                best = ins;
            }
            if admit(i - 1, j - 1) {
                let diag = if r[i - 1] == h[j - 1] {
                    prev[j - 1]
                } else {
                    (prev[j - 1].0 + 1, prev[j - 1].1 + 1)
                };
                if diag < best {
                    best = diag;
                }
            }
            cur[j] = best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Derive full counts from (errors, substitutions) and the two lengths.
fn stats_from_counts(errors: usize, subs: usize, ref_len: usize, hyp_len: usize) -> WerStats {
    // I - D = hyp_len - ref_len and I + D = errors - subs.
    let residual = errors - subs;
    let diff = hyp_len as isize - ref_len as isize;
    let insertions = ((residual as isize + diff) / 2) as usize;
    let deletions = ((residual as isize - diff) / 2) as usize;
    WerStats { substitutions: subs, insertions, deletions, ref_length: ref_len }
}

/// Plain WER between two token sequences.
pub fn word_error_rate<S: AsRef<str>>(reference: &[S], hypothesis: &[S], norm: Normalization) -> WerStats {
    let r: Vec<String> = reference.iter().filter_map(|t| norm.apply(t.as_ref())).collect();
    let h: Vec<String> = hypothesis.iter().filter_map(|t| norm.apply(t.as_ref())).collect();
    let (errors, subs) = lev_counts(&r, &h, |_, _| true);
    stats_from_counts(errors, subs, r.len(), h.len())
}

/// Replace word intervals by an equal division of the segment duration.
pub fn assign_pseudo_timestamps(segment: &Segment) -> Segment {
    let mut out = segment.clone();
    let n = out.words.len();
    if n == 0 {
        return out;
    }
    let span = out.end - out.start;
    for (k, w) in out.words.iter_mut().enumerate() {
        w.start = out.start + span * k as f64 / n as f64;
        w.end = out.start + span * (k + 1) as f64 / n as f64;
    }
    out
}

/// tcpWER parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpParams {
    pub collar: Collar,
    pub pseudo: PseudoTimestamping,
}

impl Default for TcpParams {
    fn default() -> Self {
        TcpParams { collar: Collar::Seconds(DEFAULT_COLLAR), pseudo: PseudoTimestamping::EqualDivision }
    }
}

/// Collar applied to reference word intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Collar {
    Seconds(f64),
    /// Every pair is admissible; tcpWER degenerates to cpWER.
    Unbounded,
}

impl Collar {
    fn admits(&self, reference: &TimedWord, hypothesis: &TimedWord) -> bool {
        match *self {
            Collar::Unbounded => true,
            Collar::Seconds(c) => {
                reference.start - c <= hypothesis.end && hypothesis.start <= reference.end + c
            }
        }
    }
}

/// How word timestamps are derived from segment bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PseudoTimestamping {
    #[default]
    EqualDivision,
}

/// A per-speaker assignment metric result.
#[derive(Debug, Clone, PartialEq)]
pub struct CpWerResult {
    pub stats: WerStats,
    /// Reference speaker to matched hypothesis speaker; `None` when the
    /// reference stream matched nothing.
    pub assignment: Vec<(String, Option<String>)>,
    /// Hypothesis speakers left unmatched; their words all count as insertions.
    pub unmatched_hyp: Vec<String>,
}

/// Per-speaker word streams: segments in start order, words in segment
/// order, pseudo-timestamps assigned, normalization applied. When
/// `sort_words` is set, words are additionally stable-sorted by start time.
/// For transcripts whose speakers do not overlap themselves the sort is a
/// no-op, which is what makes the unbounded-collar reduction exact.
fn speaker_streams(
    transcript: &Transcript,
    norm: Normalization,
    sort_words: bool,
) -> BTreeMap<String, Vec<TimedWord>> {
    let mut by_speaker: BTreeMap<String, Vec<&Segment>> = BTreeMap::new();
    for seg in &transcript.segments {
        by_speaker.entry(seg.speaker_id.clone()).or_default().push(seg);
    }
    let mut out = BTreeMap::new();
    for (speaker, mut segs) in by_speaker {
        segs.sort_by(|a, b| a.start.partial_cmp(&b.start).expect("segment start must not be NaN"));
        let mut words: Vec<TimedWord> = Vec::new();
        for seg in segs {
            let timed = assign_pseudo_timestamps(seg);
            for w in timed.words {
                if let Some(text) = norm.apply(&w.text) {
                    words.push(TimedWord { text, ..w });
                }
            }
        }
        if sort_words {
            words.sort_by(|a, b| a.start.partial_cmp(&b.start).expect("word start must not be NaN"));
        }
        out.insert(speaker, words);
    }
    out
}

fn assignment_wer(
    ref_streams: &BTreeMap<String, Vec<TimedWord>>,
    hyp_streams: &BTreeMap<String, Vec<TimedWord>>,
    collar: Option<Collar>,
) -> CpWerResult {
    let ref_ids: Vec<&String> = ref_streams.keys().collect();
    let hyp_ids: Vec<&String> = hyp_streams.keys().collect();
    let n = ref_ids.len().max(hyp_ids.len());

    let pair_stats = |ri: usize, hi: usize| -> WerStats {
        let empty: Vec<TimedWord> = Vec::new();
        let r = if ri < ref_ids.len() { &ref_streams[ref_ids[ri]] } else { &empty };
        let h = if hi < hyp_ids.len() { &hyp_streams[hyp_ids[hi]] } else { &empty };
        let texts_r: Vec<&str> = r.iter().map(|w| w.text.as_str()).collect();
        let texts_h: Vec<&str> = h.iter().map(|w| w.text.as_str()).collect();
        let (errors, subs) = match collar {
            None => lev_counts(&texts_r, &texts_h, |_, _| true),
            Some(c) => lev_counts(&texts_r, &texts_h, |i, j| c.admits(&r[i], &h[j])),
        };
        stats_from_counts(errors, subs, r.len(), h.len())
    };

    let mut stats_matrix: Vec<Vec<WerStats>> = Vec::with_capacity(n);
    let mut cost: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row_stats = Vec::with_capacity(n);
        let mut row_cost = Vec::with_capacity(n);
        for j in 0..n {
            let s = pair_stats(i, j);
            row_cost.push(s.errors() as f64);
            row_stats.push(s);
        }
        stats_matrix.push(row_stats);
        cost.push(row_cost);
    }

    let (cols, _) = assignment::lexicographic_min_cost_assignment(&cost);
    let mut total = WerStats::default();
    let mut mapping = Vec::new();
    let mut matched_hyp = vec![false; hyp_ids.len()];
    for (i, &j) in cols.iter().enumerate() {
        total.accumulate(&stats_matrix[i][j]);
        if i < ref_ids.len() {
            let hyp = if j < hyp_ids.len() {
                matched_hyp[j] = true;
                Some(hyp_ids[j].clone())
            } else {
                None
            };
            mapping.push((ref_ids[i].clone(), hyp));
        } else if j < hyp_ids.len() {
            matched_hyp[j] = true;
        }
    }
    let unmatched_hyp = hyp_ids
        .iter()
        .enumerate()
        .filter(|&(j, _)| !matched_hyp[j])
        .map(|(_, id)| (*id).clone())
        .collect();
    CpWerResult { stats: total, assignment: mapping, unmatched_hyp }
}

/// Concatenated-stream WER minimized over speaker assignments.
pub fn cp_wer(reference: &Transcript, hypothesis: &Transcript, norm: Normalization) -> CpWerResult {
    let ref_streams = speaker_streams(reference, norm, false);
    let hyp_streams = speaker_streams(hypothesis, norm, false);
    assignment_wer(&ref_streams, &hyp_streams, None)
}

/// Time-constrained cpWER; see module docs for the admissibility rule.
pub fn tcp_wer(
    reference: &Transcript,
    hypothesis: &Transcript,
    params: &TcpParams,
    norm: Normalization,
) -> CpWerResult {
    let PseudoTimestamping::EqualDivision = params.pseudo;
    let ref_streams = speaker_streams(reference, norm, true);
    let hyp_streams = speaker_streams(hypothesis, norm, true);
    assignment_wer(&ref_streams, &hyp_streams, Some(params.collar))
}
