//! Two-speaker mixture synthesis with exact overlap control.
//!
//! Overlap is intersection-over-union of the two speakers' activity spans.
//! Placement is planned on a 10 ms grid so every emitted time lands exactly
//! on the RTTM write resolution: source tails are trimmed (longer source
//! first) until an integer solution of x / (total - x) = ratio exists, with
//! speaker A at offset 0 and speaker B starting x grid units before A ends.
//! The requested ratio is then met to within floating-point error, not just
//! a tolerance, and byte-identical reruns only need the same seed.
//!
//! Stems are written placed: each spans the full mixture length with zeros
//! outside its activity, so the two stem files sum to the mixture file up to
//! 16-bit quantization.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formats::{self, Catalog, FormatError, Manifest};
use crate::intervals;
use crate::model::{
    ActivityEntry, MixtureRecord, Segment, SourceRef, SpeakerActivity, Transcript, Waveform,
};

/// Planning grid, seconds. Matches the RTTM write resolution.
pub const GRID_SECONDS: f64 = 0.01;

/// Largest allowed gap between requested and achieved overlap ratio.
pub const RATIO_TOLERANCE: f64 = 1e-6;

pub type Result<T> = std::result::Result<T, MixError>;

#[derive(Debug, thiserror::Error)]
pub enum MixError {
    #[error("activity must contain exactly two speakers, got {0}")]
    SpeakerCount(usize),
    #[error(
        "overlap {requested} not achievable for durations {dur_a} and {dur_b}; maximum is {max_achievable}"
    )]
    Unachievable { requested: f64, dur_a: f64, dur_b: f64, max_achievable: f64 },
    #[error("invalid overlap condition {0}: must lie in (0, 1]")]
    BadCondition(f64),
    #[error("overlap {0} has no 10 ms grid solution within {RATIO_TOLERANCE} for these sources")]
    GridUnrepresentable(f64),
    #[error("insufficient catalog: {0}")]
    InsufficientCatalog(String),
    #[error("source {utterance_id}: {message}")]
    BadSource { utterance_id: String, message: String },
    #[error("sample rate {0} is not a multiple of 100, cannot plan on the 10 ms grid")]
    UngriddableRate(u32),
    #[error("sources must share one sample rate, got {0} and {1}")]
    MixedRates(u32, u32),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Overlap ratio of a two-speaker activity: intersection-over-union of the
/// speakers' merged spans.
pub fn measure_overlap(activity: &SpeakerActivity) -> Result<f64> {
    let speakers = activity.speakers();
    if speakers.len() != 2 {
        return Err(MixError::SpeakerCount(speakers.len()));
    }
    let a = activity.speaker_intervals(&speakers[0]);
    let b = activity.speaker_intervals(&speakers[1]);
    Ok(intervals::iou(&a, &b))
}

/// Closed-form placement for a requested overlap ratio: speaker A at
/// offset 0, speaker B at `dur_a - x` where x solves
/// x / (dur_a + dur_b - x) = target. Errors state the maximum achievable
/// ratio when the request exceeds it.
pub fn plan_offsets(dur_a: f64, dur_b: f64, target: f64) -> Result<(f64, f64)> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(MixError::BadCondition(target));
    }
    let shorter = dur_a.min(dur_b);
    let max_achievable = shorter / (dur_a + dur_b - shorter);
    if target > max_achievable * (1.0 + 1e-12) {
        return Err(MixError::Unachievable { requested: target, dur_a, dur_b, max_achievable });
    }
    let x = target * (dur_a + dur_b) / (1.0 + target);
    Ok((0.0, (dur_a - x).max(0.0)))
}

/// Integer placement on the 10 ms grid, all fields in grid units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPlan {
    pub a_units: usize,
    pub b_units: usize,
    pub intersection_units: usize,
    pub offset_b_units: usize,
}

impl GridPlan {
    pub fn ratio(&self) -> f64 {
        let union = (self.a_units + self.b_units - self.intersection_units) as f64;
        self.intersection_units as f64 / union
    }
}

/// Trim `a + b` down to `s` total units: the longer side first, then both
/// alternately. Returns the trimmed pair.
fn split_for_total(a: usize, b: usize, s: usize) -> (usize, usize) {
    let cut = a + b - s;
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if cut <= hi - lo {
        if a >= b {
            (a - cut, b)
        } else {
            (a, b - cut)
        }
    } else {
        let r = cut - (hi - lo);
        (lo - r.div_ceil(2), lo - r / 2)
    }
}

/// Find the largest-total grid placement meeting `target` within
/// [`RATIO_TOLERANCE`]. Sources may be trimmed; never below one grid unit.
pub fn grid_plan(a_units: usize, b_units: usize, target: f64) -> Result<GridPlan> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(MixError::BadCondition(target));
    }
    if a_units == 0 || b_units == 0 {
        return Err(MixError::GridUnrepresentable(target));
    }
    let mut best: Option<(f64, GridPlan)> = None;
    let total = a_units + b_units;
    for s in (2..=total).rev() {
        let (ta, tb) = split_for_total(a_units, b_units, s);
        let limit = ta.min(tb);
        let x_real = target * s as f64 / (1.0 + target);
        for cand in [x_real.floor() as isize, x_real.ceil() as isize] {
            let x = cand.clamp(1, limit as isize) as usize;
            let ratio = x as f64 / (s - x) as f64;
            let err = (ratio - target).abs();
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((
                    err,
                    GridPlan {
                        a_units: ta,
                        b_units: tb,
                        intersection_units: x,
                        offset_b_units: ta - x,
                    },
                ));
            }
        }
        if let Some((err, _)) = best {
            if err < 1e-12 {
                break;
            }
        }
    }
    match best {
        Some((err, plan)) if err <= RATIO_TOLERANCE => Ok(plan),
        _ => Err(MixError::GridUnrepresentable(target)),
    }
}

/// Synthesis parameters for one dataset build.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildParams {
    /// Overlap conditions, each in (0, 1].
    pub conditions: Vec<f64>,
    pub mixtures_per_condition: usize,
    pub seed: u64,
    /// Uniform per-source gain jitter in +-dB; 0 keeps unit gains.
    pub gain_jitter_db: f64,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            conditions: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            mixtures_per_condition: 500,
            seed: 0,
            gain_jitter_db: 0.0,
        }
    }
}

/// Everything `build_dataset` wrote, plus the in-memory manifest.
#[derive(Debug)]
pub struct BuiltDataset {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub rttm_path: PathBuf,
    pub seglst_path: PathBuf,
}

/// Overlap condition as an integer percentage, e.g. 0.2 -> 20.
pub fn condition_percent(condition: f64) -> u32 {
    (condition * 100.0).round() as u32
}

/// Zero-padded condition tag used in ids and file names, e.g. 0.2 -> "020".
pub fn condition_tag(condition: f64) -> String {
    format!("{:03}", condition_percent(condition))
}

/// Synthesize the full mixture set described by `params` into `out_dir`.
///
/// Layout: `wav/<id>.wav` mixtures, `stems/<id>.{target,nontarget}.wav`
/// placed stems, `activity.rttm`, `reference.seglst`, `manifest.json`.
/// Identical inputs and seed produce byte-identical outputs.
pub fn build_dataset(
    catalog: &Catalog,
    catalog_dir: &Path,
    params: &BuildParams,
    out_dir: &Path,
) -> Result<BuiltDataset> {
    for &c in &params.conditions {
        if !(c > 0.0 && c <= 1.0) {
            return Err(MixError::BadCondition(c));
        }
    }
    let speakers = catalog.speakers();
    if speakers.len() < 2 {
        return Err(MixError::InsufficientCatalog(format!(
            "need at least 2 speakers, got {}",
            speakers.len()
        )));
    }
    let ordered_pairs: Vec<(String, String)> = speakers
        .iter()
        .flat_map(|a| {
            speakers.iter().filter(move |b| *b != a).map(move |b| (a.clone(), b.clone()))
        })
        .collect();
    if params.mixtures_per_condition > ordered_pairs.len() {
        return Err(MixError::InsufficientCatalog(format!(
            "{} mixtures per condition requested but only {} ordered speaker pairs exist",
            params.mixtures_per_condition,
            ordered_pairs.len()
        )));
    }

    // load every source once; all must share one grid-compatible rate
    let mut sources: HashMap<String, Waveform> = HashMap::new();
    let mut sample_rate: Option<u32> = None;
    for entry in &catalog.entries {
        let wave = formats::read_wav(catalog.resolve_path(catalog_dir, entry))?;
        match sample_rate {
            None => {
                if wave.sample_rate % 100 != 0 {
                    return Err(MixError::UngriddableRate(wave.sample_rate));
                }
                sample_rate = Some(wave.sample_rate);
            }
            Some(r) if r != wave.sample_rate => {
                return Err(MixError::MixedRates(r, wave.sample_rate));
            }
            _ => {}
        }
        sources.insert(entry.utterance_id.clone(), wave);
    }
    let sample_rate =
        sample_rate.ok_or_else(|| MixError::InsufficientCatalog("catalog is empty".into()))?;
    let unit = (sample_rate / 100) as usize;

    std::fs::create_dir_all(out_dir.join("wav")).map_err(FormatError::Io)?;
    std::fs::create_dir_all(out_dir.join("stems")).map_err(FormatError::Io)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut records: Vec<MixtureRecord> = Vec::new();
    let mut activities: Vec<SpeakerActivity> = Vec::new();
    let mut reference: Vec<Transcript> = Vec::new();

    for &condition in &params.conditions {
        let mut pairs = ordered_pairs.clone();
        pairs.shuffle(&mut rng);
        pairs.truncate(params.mixtures_per_condition);
        for (k, (spk_a, spk_b)) in pairs.iter().enumerate() {
            let mixture_id = format!("mix_ov{}_{:04}", condition_tag(condition), k + 1);
            let utt_a = pick_utterance(catalog, spk_a, &mut rng);
            let utt_b = pick_utterance(catalog, spk_b, &mut rng);
            let (gain_a, gain_b) = if params.gain_jitter_db > 0.0 {
                let j = params.gain_jitter_db;
                (db_to_gain(rng.gen_range(-j..=j)), db_to_gain(rng.gen_range(-j..=j)))
            } else {
                (1.0, 1.0)
            };

            let wave_a = &sources[&utt_a];
            let wave_b = &sources[&utt_b];
            let a_units = wave_a.samples.len() / unit;
            let b_units = wave_b.samples.len() / unit;
            if a_units == 0 || b_units == 0 {
                let (id, _) = if a_units == 0 { (&utt_a, 0) } else { (&utt_b, 0) };
                return Err(MixError::BadSource {
                    utterance_id: id.clone(),
                    message: "shorter than one 10 ms grid unit".into(),
                });
            }
            let plan = grid_plan(a_units, b_units, condition)?;

            let len_a = plan.a_units * unit;
            let len_b = plan.b_units * unit;
            let offset_b = plan.offset_b_units * unit;
            let mix_len = offset_b + len_b; // == union; B always ends last
            debug_assert!(mix_len >= len_a);

            let mut stem_a = vec![0.0f64; mix_len];
            for (i, s) in wave_a.samples[..len_a].iter().enumerate() {
                stem_a[i] = s * gain_a;
            }
            let mut stem_b = vec![0.0f64; mix_len];
            for (i, s) in wave_b.samples[..len_b].iter().enumerate() {
                stem_b[offset_b + i] = s * gain_b;
            }
            let mixture: Vec<f64> = stem_a.iter().zip(&stem_b).map(|(x, y)| x + y).collect();

            formats::write_wav(
                out_dir.join("wav").join(format!("{mixture_id}.wav")),
                &Waveform::new(mixture, sample_rate),
            )?;
            formats::write_wav(
                out_dir.join("stems").join(format!("{mixture_id}.target.wav")),
                &Waveform::new(stem_a, sample_rate),
            )?;
            formats::write_wav(
                out_dir.join("stems").join(format!("{mixture_id}.nontarget.wav")),
                &Waveform::new(stem_b, sample_rate),
            )?;

            let dur_a = plan.a_units as f64 * GRID_SECONDS;
            let dur_b = plan.b_units as f64 * GRID_SECONDS;
            let off_b = plan.offset_b_units as f64 * GRID_SECONDS;
            let mut activity = SpeakerActivity::new(&mixture_id);
            activity.entries.push(ActivityEntry::new(spk_a.clone(), 0.0, dur_a));
            activity.entries.push(ActivityEntry::new(spk_b.clone(), off_b, dur_b));
            let overlap_measured = measure_overlap(&activity)?;

            reference.push(reference_transcript(
                &mixture_id,
                catalog,
                &[(spk_a, &utt_a, 0.0, dur_a), (spk_b, &utt_b, off_b, dur_b)],
            ));
            activities.push(activity.clone());
            records.push(MixtureRecord {
                mixture_id,
                target_source: SourceRef {
                    utterance_id: utt_a,
                    speaker_id: spk_a.clone(),
                    offset: 0.0,
                    gain: gain_a,
                },
                nontarget_source: SourceRef {
                    utterance_id: utt_b,
                    speaker_id: spk_b.clone(),
                    offset: off_b,
                    gain: gain_b,
                },
                overlap_requested: condition,
                overlap_measured,
                activity,
            });
        }
    }

    let manifest = Manifest { sample_rate, mixtures: records };
    let manifest_path = out_dir.join("manifest.json");
    formats::write_manifest(&manifest_path, &manifest)?;
    let rttm_path = out_dir.join("activity.rttm");
    std::fs::write(&rttm_path, formats::write_rttm(&activities)).map_err(FormatError::Io)?;
    let seglst_path = out_dir.join("reference.seglst");
    std::fs::write(&seglst_path, formats::write_seglst(&reference)).map_err(FormatError::Io)?;
    Ok(BuiltDataset { manifest, manifest_path, rttm_path, seglst_path })
}

fn pick_utterance(catalog: &Catalog, speaker: &str, rng: &mut ChaCha8Rng) -> String {
    let entries = catalog.entries_of(speaker);
    entries[rng.gen_range(0..entries.len())].utterance_id.clone()
}

fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

fn reference_transcript(
    mixture_id: &str,
    catalog: &Catalog,
    placed: &[(&String, &String, f64, f64)],
) -> Transcript {
    let mut t = Transcript::new(mixture_id);
    for &(speaker, utterance, start, duration) in placed {
        let text = catalog
            .entry(utterance)
            .and_then(|e| e.transcript.clone())
            .unwrap_or_default();
        t.segments.push(Segment::with_text(mixture_id, speaker, start, start + duration, &text));
    }
    t
}
