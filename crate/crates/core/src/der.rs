//! Diarization error rate with collar-excluded scoring regions.
//!
//! The timeline is cut into homogeneous regions at every activity or collar
//! boundary. Regions inside a collar zone (within `collar` seconds of any
//! reference entry boundary) are excluded entirely; the rest contribute
//! missed, false-alarm, and confusion time against the reference speech
//! total. Overlapping speech is scored, not skipped.
//!
//! Speaker confusion is counted under the reference-to-hypothesis mapping
//! that maximizes total attributed overlap within scored regions, solved
//! exactly; mapping ties break toward lexicographically smaller speaker ids.

use crate::assignment;
use crate::intervals;
use crate::model::SpeakerActivity;

/// Default collar, seconds, excluded around each reference boundary.
pub const DEFAULT_COLLAR: f64 = 0.25;

pub type Result<T> = std::result::Result<T, DerError>;

#[derive(Debug, thiserror::Error)]
pub enum DerError {
    #[error("session mismatch: reference {reference} vs hypothesis {hypothesis}")]
    SessionMismatch { reference: String, hypothesis: String },
}

/// Time accounting of one diarization comparison, all in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DerResult {
    pub missed: f64,
    pub false_alarm: f64,
    pub confusion: f64,
    /// Reference speech time within scored regions (overlap counted per speaker).
    pub total_ref: f64,
    /// Reference speaker to hypothesis speaker mapping used for confusion.
    pub mapping: Vec<(String, Option<String>)>,
}

impl DerResult {
    /// (missed + false alarm + confusion) / total_ref; 0 for an empty
    /// comparison, +inf when errors exist against zero reference speech.
    pub fn der(&self) -> f64 {
        let errors = self.missed + self.false_alarm + self.confusion;
        if self.total_ref == 0.0 {
            if errors == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            errors / self.total_ref
        }
    }

    pub fn accumulate(&mut self, other: &DerResult) {
        self.missed += other.missed;
        self.false_alarm += other.false_alarm;
        self.confusion += other.confusion;
        self.total_ref += other.total_ref;
    }
}

/// Pool per-session results into one time-weighted total.
pub fn sum_der<'a>(results: impl IntoIterator<Item = &'a DerResult>) -> DerResult {
    let mut total = DerResult {
        missed: 0.0,
        false_alarm: 0.0,
        confusion: 0.0,
        total_ref: 0.0,
        mapping: Vec::new(),
    };
    for r in results {
        total.accumulate(r);
    }
    total
}

struct Region {
    duration: f64,
    ref_active: Vec<bool>,
    hyp_active: Vec<bool>,
}

/// Compute DER between a reference and a hypothesis activity.
pub fn der(reference: &SpeakerActivity, hypothesis: &SpeakerActivity, collar: f64) -> Result<DerResult> {
    if reference.session_id != hypothesis.session_id {
        return Err(DerError::SessionMismatch {
            reference: reference.session_id.clone(),
            hypothesis: hypothesis.session_id.clone(),
        });
    }

    let ref_ids = reference.speakers();
    let hyp_ids = hypothesis.speakers();
    let ref_tracks: Vec<Vec<(f64, f64)>> =
        ref_ids.iter().map(|s| reference.speaker_intervals(s)).collect();
    let hyp_tracks: Vec<Vec<(f64, f64)>> =
        hyp_ids.iter().map(|s| hypothesis.speaker_intervals(s)).collect();

    let no_score: Vec<(f64, f64)> = if collar > 0.0 {
        let zones: Vec<(f64, f64)> = reference
            .entries
            .iter()
            .flat_map(|e| {
                [(e.onset - collar, e.onset + collar), (e.offset() - collar, e.offset() + collar)]
            })
            .collect();
        intervals::normalize(&zones)
    } else {
        Vec::new()
    };

    // Homogeneous regions: cut at every track and collar-zone boundary.
    let mut events: Vec<f64> = Vec::new();
    for track in ref_tracks.iter().chain(hyp_tracks.iter()) {
        for &(s, e) in track {
            events.push(s);
            events.push(e);
        }
    }
    for &(s, e) in &no_score {
        events.push(s);
        events.push(e);
    }
    events.sort_by(|a, b| a.partial_cmp(b).expect("event times must not be NaN"));
    events.dedup();

    let covers = |track: &[(f64, f64)], t: f64| track.iter().any(|&(s, e)| s <= t && t < e);
    let mut regions: Vec<Region> = Vec::new();
    for pair in events.windows(2) {
        let (t0, t1) = (pair[0], pair[1]);
        if t1 <= t0 {
            continue;
        }
        let mid = t0 + (t1 - t0) / 2.0;
        if covers(&no_score, mid) {
            continue;
        }
        regions.push(Region {
            duration: t1 - t0,
            ref_active: ref_tracks.iter().map(|t| covers(t, mid)).collect(),
            hyp_active: hyp_tracks.iter().map(|t| covers(t, mid)).collect(),
        });
    }

    // Mapping maximizing attributed overlap within scored regions.
    let n = ref_ids.len().max(hyp_ids.len());
    let mut mapping: Vec<(String, Option<String>)> = Vec::new();
    let mut assigned_hyp: Vec<Option<usize>> = vec![None; ref_ids.len()];
    if n > 0 {
        let mut cost = vec![vec![0.0f64; n]; n];
        for region in &regions {
            for (i, &ra) in region.ref_active.iter().enumerate() {
                if !ra {
                    continue;
                }
                for (j, &ha) in region.hyp_active.iter().enumerate() {
                    if ha {
                        cost[i][j] -= region.duration; // negated profit
                    }
                }
            }
        }
        let (cols, _) = assignment::lexicographic_min_cost_assignment(&cost);
        for (i, id) in ref_ids.iter().enumerate() {
            let j = cols[i];
            // map only pairs with real shared time; a zero-profit column is
            // padding in effect even when it names a hypothesis speaker
            if j < hyp_ids.len() && cost[i][j] < 0.0 {
                assigned_hyp[i] = Some(j);
                mapping.push((id.clone(), Some(hyp_ids[j].clone())));
            } else {
                mapping.push((id.clone(), None));
            }
        }
    }

    let mut result = DerResult {
        missed: 0.0,
        false_alarm: 0.0,
        confusion: 0.0,
        total_ref: 0.0,
        mapping,
    };
    for region in &regions {
        let nref = region.ref_active.iter().filter(|&&a| a).count();
        let nhyp = region.hyp_active.iter().filter(|&&a| a).count();
        let nmatch = assigned_hyp
            .iter()
            .enumerate()
            .filter(|&(i, j)| {
                region.ref_active[i] && j.is_some_and(|j| region.hyp_active[j])
            })
            .count();
        let d = region.duration;
        result.total_ref += d * nref as f64;
        result.missed += d * nref.saturating_sub(nhyp) as f64;
        result.false_alarm += d * nhyp.saturating_sub(nref) as f64;
        result.confusion += d * (nref.min(nhyp) - nmatch) as f64;
    }
    Ok(result)
}
