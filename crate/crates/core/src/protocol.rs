//! Enrollment sets, verification trial lists, and extraction references.
//!
//! Enrollment utterances are drawn per speaker from catalog entries that do
//! not appear in any mixture. Each mixture yields one target trial against
//! its true target speaker plus one nontarget trial per other enrolled
//! speaker, so a condition with M mixtures and S speakers always produces
//! M target and M*(S-1) nontarget trials. All sampling is seeded.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formats::Catalog;
use crate::model::{MixtureRecord, Trial};

/// Enrollment utterances selected per speaker.
pub const DEFAULT_ENROLLMENT_PER_SPEAKER: usize = 15;

pub type Result<T> = std::result::Result<T, ProtocolError>;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("speaker {speaker}: only {available} spare utterances, need {needed}")]
    InsufficientUtterances { speaker: String, available: usize, needed: usize },
    #[error("mixture {mixture_id}: target speaker {speaker} is not enrolled")]
    SpeakerNotEnrolled { mixture_id: String, speaker: String },
    #[error("speaker {0}: no utterance outside the mixture set to use as an extraction reference")]
    NoSpareReference(String),
}

/// Trials plus the pipeline stage whose audio supplies the test-side
/// embedding, so one list can score several stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialList {
    pub stage: String,
    pub trials: Vec<Trial>,
}

impl TrialList {
    pub fn target_count(&self) -> usize {
        self.trials.iter().filter(|t| t.label == crate::model::LABEL_TARGET).count()
    }

    pub fn nontarget_count(&self) -> usize {
        self.trials.len() - self.target_count()
    }
}

/// Utterance ids used by any source of any mixture; the exclusion set for
/// enrollment and reference selection.
pub fn mixture_utterances(mixtures: &[MixtureRecord]) -> HashSet<String> {
    mixtures
        .iter()
        .flat_map(|m| {
            [m.target_source.utterance_id.clone(), m.nontarget_source.utterance_id.clone()]
        })
        .collect()
}

/// Pick `per_speaker` enrollment utterances for every catalog speaker,
/// never reusing anything in `exclude`. Deterministic under `seed`.
pub fn generate_enrollment(
    catalog: &Catalog,
    per_speaker: usize,
    exclude: &HashSet<String>,
    seed: u64,
) -> Result<BTreeMap<String, Vec<String>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeMap::new();
    for speaker in catalog.speakers() {
        let mut candidates: Vec<String> = catalog
            .entries_of(&speaker)
            .iter()
            .map(|e| e.utterance_id.clone())
            .filter(|id| !exclude.contains(id))
            .collect();
        if candidates.len() < per_speaker {
            return Err(ProtocolError::InsufficientUtterances {
                speaker,
                available: candidates.len(),
                needed: per_speaker,
            });
        }
        candidates.shuffle(&mut rng);
        candidates.truncate(per_speaker);
        candidates.sort();
        out.insert(speaker, candidates);
    }
    Ok(out)
}

/// Build the trial list for one condition slice: per mixture, one target
/// trial plus a nontarget trial against every other enrolled speaker.
/// The test id is the mixture id.
pub fn generate_trials(
    mixtures: &[MixtureRecord],
    enrolled: &[String],
    stage: &str,
) -> Result<TrialList> {
    let mut speakers: Vec<&String> = enrolled.iter().collect();
    speakers.sort();
    speakers.dedup();
    let mut trials = Vec::with_capacity(mixtures.len() * speakers.len());
    for mixture in mixtures {
        let target = &mixture.target_source.speaker_id;
        if speakers.binary_search(&target).is_err() {
            return Err(ProtocolError::SpeakerNotEnrolled {
                mixture_id: mixture.mixture_id.clone(),
                speaker: target.clone(),
            });
        }
        trials.push(Trial::target(target.clone(), mixture.mixture_id.clone()));
        for &other in &speakers {
            if other != target {
                trials.push(Trial::nontarget(other.clone(), mixture.mixture_id.clone()));
            }
        }
    }
    Ok(TrialList { stage: stage.into(), trials })
}

/// For each mixture, pick one target-speaker utterance that appears in no
/// mixture, to serve as the extraction reference. Deterministic under `seed`.
pub fn select_tse_references(
    catalog: &Catalog,
    mixtures: &[MixtureRecord],
    seed: u64,
) -> Result<BTreeMap<String, String>> {
    let used = mixture_utterances(mixtures);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeMap::new();
    for mixture in mixtures {
        let speaker = &mixture.target_source.speaker_id;
        let spare: Vec<&str> = catalog
            .entries_of(speaker)
            .iter()
            .map(|e| e.utterance_id.as_str())
            .filter(|id| !used.contains(*id))
            .collect();
        if spare.is_empty() {
            return Err(ProtocolError::NoSpareReference(speaker.clone()));
        }
        let pick = spare[rng.gen_range(0..spare.len())];
        out.insert(mixture.mixture_id.clone(), pick.to_string());
    }
    Ok(out)
}

/// How the simulated attacker obtains its extraction reference and
/// enrollment material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackerKind {
    /// Uses original reference audio and original enrollment.
    Ignorant,
    /// Anonymizes the reference and enrollment audio before embedding.
    SemiInformed,
}

/// Audio the attacker's extractor is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Original,
    Anonymized,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AttackConfig {
    pub attacker_kind: AttackerKind,
    pub reference_kind: ReferenceKind,
    pub tse_adapter: String,
    pub asv_adapter: String,
}

impl AttackConfig {
    /// Semi-informed attacks embed anonymized material, so they need the
    /// anonymized reference audio to exist.
    pub fn needs_anonymized_references(&self) -> bool {
        self.reference_kind == ReferenceKind::Anonymized
            || self.attacker_kind == AttackerKind::SemiInformed
    }
}
