//! Bundle evaluation: per-condition metric files and score lists.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use super::run::{read_embedding_file, Bundle, RunConfig};
use super::{condition_tag, PipelineError, Result, Stage};
use crate::formats::{self, FormatError, Manifest};
use crate::model::{Embedding, MixtureRecord, Transcript, Trial};
use crate::wer::{self, Collar, Normalization, TcpParams};
use crate::{asv, der, signal};

/// One metric over one stage, value per overlap condition. Values are
/// percentages except SI-SDR, which is in dB; `null` marks a condition
/// that produced no usable value (reason in `notes`).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricFile {
    pub metric: String,
    pub stage: String,
    pub unit: String,
    /// Keyed by zero-padded condition tag, e.g. "020".
    pub values: BTreeMap<String, Option<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

impl MetricFile {
    pub fn new(stage: &str, metric: &str, unit: &str) -> MetricFile {
        MetricFile {
            metric: metric.into(),
            stage: stage.into(),
            unit: unit.into(),
            values: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MetricFile> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(FormatError::Io)?;
        serde_json::from_str(&text).map_err(|e| {
            PipelineError::Invalid(format!("{}: {e}", path.as_ref().display()))
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(FormatError::Io)?;
        }
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| PipelineError::Invalid(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(FormatError::Io)?;
        Ok(())
    }
}

pub(crate) struct EvalCtx<'a> {
    pub cfg: &'a RunConfig,
    pub bundle: &'a Bundle,
    pub dataset_dir: &'a Path,
    pub manifest: &'a Manifest,
    pub references: &'a HashMap<String, Transcript>,
    /// Aligned with `manifest.mixtures`; false rows are skipped everywhere.
    pub ok: &'a [bool],
    /// Per-condition trial lists, keyed by condition tag.
    pub trials: &'a BTreeMap<String, Vec<Trial>>,
    /// Averaged enrollment embedding per speaker.
    pub enrollment: &'a BTreeMap<String, Embedding>,
}

/// Words of a transcript in segment order, optionally one speaker's only.
fn transcript_words(t: &Transcript, speaker: Option<&str>) -> Vec<String> {
    t.segments
        .iter()
        .filter(|s| speaker.is_none_or(|spk| s.speaker_id == spk))
        .flat_map(|s| s.words.iter().map(|w| w.text.clone()))
        .collect()
}

fn read_transcript(path: &Path, session: &str) -> Result<Transcript> {
    let file = std::fs::File::open(path).map_err(FormatError::Io)?;
    let parsed = formats::parse_seglst(std::io::BufReader::new(file))?;
    Ok(parsed.into_iter().next().unwrap_or_else(|| Transcript::new(session)))
}

fn read_activity(path: &Path, session: &str) -> Result<crate::model::SpeakerActivity> {
    let file = std::fs::File::open(path).map_err(FormatError::Io)?;
    let parsed = formats::parse_rttm(std::io::BufReader::new(file))?;
    Ok(parsed
        .into_iter()
        .next()
        .unwrap_or_else(|| crate::model::SpeakerActivity::new(session)))
}

/// Group manifest indices by condition tag, keeping manifest order.
fn by_condition(manifest: &Manifest) -> BTreeMap<String, Vec<usize>> {
    let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, record) in manifest.mixtures.iter().enumerate() {
        map.entry(condition_tag(record.overlap_requested)).or_default().push(i);
    }
    map
}

pub(crate) fn evaluate(ctx: &EvalCtx<'_>) -> Result<Vec<PathBuf>> {
    let norm = Normalization::default();
    let tcp = TcpParams {
        collar: Collar::Seconds(ctx.cfg.tcp_collar),
        pseudo: wer::PseudoTimestamping::EqualDivision,
    };
    let conditions = by_condition(ctx.manifest);

    let mut extracted_wer = MetricFile::new("extracted", "wer", "percent");
    let mut anonymized_wer = MetricFile::new("anonymized", "wer", "percent");
    let mut original_tcp = MetricFile::new("original", "tcpwer", "percent");
    let mut recombined_tcp = MetricFile::new("recombined", "tcpwer", "percent");
    let mut original_der = MetricFile::new("original", "der", "percent");
    let mut recombined_der = MetricFile::new("recombined", "der", "percent");
    let mut extracted_eer = MetricFile::new("extracted", "eer", "percent");
    let mut anonymized_eer = MetricFile::new("anonymized", "eer", "percent");
    let mut extracted_sisdr = MetricFile::new("extracted", "sisdr", "db");

    for (tag, indices) in &conditions {
        let rows: Vec<&MixtureRecord> = indices
            .iter()
            .filter(|&&i| ctx.ok[i])
            .map(|&i| &ctx.manifest.mixtures[i])
            .collect();
        if rows.is_empty() {
            for m in [
                &mut extracted_wer,
                &mut anonymized_wer,
                &mut original_tcp,
                &mut recombined_tcp,
                &mut original_der,
                &mut recombined_der,
                &mut extracted_eer,
                &mut anonymized_eer,
                &mut extracted_sisdr,
            ] {
                m.values.insert(tag.clone(), None);
                m.notes.insert(tag.clone(), "no completed mixtures".into());
            }
            continue;
        }

        // single-stream WER on the extraction side
        for (stage, metric) in
            [(Stage::Extracted, &mut extracted_wer), (Stage::Anonymized, &mut anonymized_wer)]
        {
            let mut stats = wer::WerStats::default();
            for record in &rows {
                let id = &record.mixture_id;
                let reference = &ctx.references[id];
                let ref_words =
                    transcript_words(reference, Some(&record.target_source.speaker_id));
                let hyp = read_transcript(&ctx.bundle.transcript(stage, id), id)?;
                let hyp_words = transcript_words(&hyp, None);
                stats.accumulate(&wer::word_error_rate(&ref_words, &hyp_words, norm));
            }
            metric.values.insert(tag.clone(), Some(stats.rate() * 100.0));
        }

        // assignment WER on the mixture-like streams
        for (stage, metric) in
            [(Stage::Original, &mut original_tcp), (Stage::Recombined, &mut recombined_tcp)]
        {
            let mut stats = wer::WerStats::default();
            for record in &rows {
                let id = &record.mixture_id;
                let hyp = read_transcript(&ctx.bundle.transcript(stage, id), id)?;
                stats.accumulate(&wer::tcp_wer(&ctx.references[id], &hyp, &tcp, norm).stats);
            }
            metric.values.insert(tag.clone(), Some(stats.rate() * 100.0));
        }

        // diarization on the mixture-like streams
        for (stage, metric) in
            [(Stage::Original, &mut original_der), (Stage::Recombined, &mut recombined_der)]
        {
            let mut acc = der::DerResult::default();
            for record in &rows {
                let id = &record.mixture_id;
                let hyp = read_activity(&ctx.bundle.rttm(stage, id), id)?;
                acc.accumulate(&der::der(&record.activity, &hyp, ctx.cfg.der_collar)?);
            }
            metric.values.insert(tag.clone(), Some(acc.der() * 100.0));
        }

        // verification scores on the extraction side
        let trial_list = ctx.trials.get(tag).ok_or_else(|| {
            PipelineError::Invalid(format!("no trial list loaded for condition {tag}"))
        })?;
        for (stage, metric) in
            [(Stage::Extracted, &mut extracted_eer), (Stage::Anonymized, &mut anonymized_eer)]
        {
            let mut test: HashMap<String, Embedding> = HashMap::new();
            for record in &rows {
                let id = &record.mixture_id;
                let emb = read_embedding_file(
                    &ctx.bundle.embedding(stage.dir_name(), id),
                    stage.dir_name(),
                )?;
                test.insert(id.clone(), emb);
            }
            let usable: Vec<Trial> = trial_list
                .iter()
                .filter(|t| test.contains_key(&t.test_id))
                .cloned()
                .collect();
            let enroll: HashMap<String, Embedding> =
                ctx.enrollment.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            match score_and_write(
                ctx.bundle,
                stage.dir_name(),
                tag,
                &usable,
                &enroll,
                &test,
            ) {
                Ok(value) => {
                    metric.values.insert(tag.clone(), Some(value));
                }
                Err(e) => {
                    metric.values.insert(tag.clone(), None);
                    metric.notes.insert(tag.clone(), e.to_string());
                }
            }
        }

        // separation quality of the extraction against the true stem
        let mut sdr_values = Vec::with_capacity(rows.len());
        for record in &rows {
            let id = &record.mixture_id;
            let estimate = formats::read_wav(ctx.bundle.stage_wav(Stage::Extracted, id))?;
            let truth = formats::read_wav(
                ctx.dataset_dir.join("stems").join(format!("{id}.target.wav")),
            )?;
            sdr_values.push(signal::si_sdr(&estimate, &truth)?.value_db);
        }
        match signal::mean_si_sdr(&sdr_values) {
            Ok(mean) => {
                extracted_sisdr.values.insert(tag.clone(), Some(mean.mean_db));
                if mean.excluded_infinite > 0 {
                    extracted_sisdr.notes.insert(
                        tag.clone(),
                        format!("{} infinite values excluded", mean.excluded_infinite),
                    );
                }
            }
            Err(e) => {
                extracted_sisdr.values.insert(tag.clone(), None);
                extracted_sisdr.notes.insert(tag.clone(), e.to_string());
            }
        }
    }

    let mut written = Vec::new();
    for metric in [
        &original_tcp,
        &original_der,
        &extracted_wer,
        &extracted_eer,
        &extracted_sisdr,
        &anonymized_wer,
        &anonymized_eer,
        &recombined_tcp,
        &recombined_der,
    ] {
        let path = ctx.bundle.metric_file(&metric.stage, &metric.metric);
        metric.write(&path)?;
        written.push(path);
    }
    Ok(written)
}

/// Score a trial list, write the trial/score pair for the condition, and
/// return the EER in percent.
pub(crate) fn score_and_write(
    bundle: &Bundle,
    group: &str,
    tag: &str,
    trials: &[Trial],
    enroll: &HashMap<String, Embedding>,
    test: &HashMap<String, Embedding>,
) -> Result<f64> {
    let scored = asv::score_trials(trials, enroll, test)?;
    let trials_path = bundle.scores_file(group, tag, "trials");
    if let Some(parent) = trials_path.parent() {
        std::fs::create_dir_all(parent).map_err(FormatError::Io)?;
    }
    std::fs::write(&trials_path, formats::write_trials(trials)).map_err(FormatError::Io)?;
    std::fs::write(bundle.scores_file(group, tag, "scores"), formats::write_scores(&scored))
        .map_err(FormatError::Io)?;
    Ok(asv::eer(&scored)?.eer * 100.0)
}
