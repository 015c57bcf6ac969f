//! Attacker simulation over a finished bundle: re-extract the target from
//! the recombined audio, embed it, and score against enrollment models.
//!
//! The ignorant attacker enrolls and references original audio; the
//! semi-informed attacker pushes its reference material through the
//! configured anonymizer first.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::adapter::{AdapterIo, AdapterKind, AdapterSpec};
use super::builtins::OracleCtx;
use super::run::{
    cache_hit, embed_fingerprint, enrollment_embeddings, file_sha256, load_json,
    load_references, load_trials, read_embedding_file, store_cache_key, Bundle, FailureRecord,
    RunConfig, RunInputs,
};
use super::stages::{self, AdapterCall};
use super::{eval, PipelineError, Result, Stage};
use crate::formats::{self, FormatError};
use crate::model::{Embedding, MixtureRecord, Transcript, Trial};
use crate::protocol::{AttackConfig, AttackerKind, ReferenceKind};

#[derive(Debug)]
pub struct AttackSummary {
    /// Label the attack's artifacts and metric file carry.
    pub label: String,
    pub mixtures: usize,
    pub scored_mixtures: usize,
    pub failures: Vec<FailureRecord>,
    /// EER percent per condition tag; None when scoring was impossible.
    pub eer: BTreeMap<String, Option<f64>>,
    pub metrics_path: PathBuf,
}

/// Artifact label for one attack scenario.
pub fn attack_label(config: &AttackConfig) -> &'static str {
    match config.attacker_kind {
        AttackerKind::Ignorant => "attack_ignorant",
        AttackerKind::SemiInformed => "attack_semi_informed",
    }
}

/// Everything one attack scenario shares across workers.
struct AttackCtx<'a> {
    cfg: &'a RunConfig,
    config: &'a AttackConfig,
    bundle: Bundle,
    dataset_dir: &'a Path,
    label: &'static str,
    tse_spec: &'a AdapterSpec,
    embed_spec: &'a AdapterSpec,
    fingerprint: String,
    references: HashMap<String, Transcript>,
    tse_refs: BTreeMap<String, String>,
    /// Reference audio per utterance id, already anonymized when the
    /// scenario calls for that; errors kept per utterance.
    reference_audio: BTreeMap<String, std::result::Result<PathBuf, String>>,
}

/// Run one attack scenario against the recombined audio of a bundle.
pub fn run_attack(
    cfg: &RunConfig,
    config: &AttackConfig,
    io: &RunInputs<'_>,
) -> Result<AttackSummary> {
    cfg.adapters.validate()?;
    let tse_spec = cfg.adapters.get(&config.tse_adapter, AdapterKind::Tse)?;
    let embed_spec = cfg.adapters.get(&config.asv_adapter, AdapterKind::Embedder)?;
    let anonymizer = if config.needs_anonymized_references() {
        Some(cfg.adapters.get(&cfg.roles.anonymizer, AdapterKind::Anonymizer).map_err(|_| {
            PipelineError::Invalid(
                "attack needs anonymized reference audio but no anonymizer adapter is configured"
                    .into(),
            )
        })?)
    } else {
        None
    };

    let manifest = formats::read_manifest(io.dataset_dir.join("manifest.json"))?;
    let references = load_references(io.dataset_dir)?;
    let catalog = formats::read_catalog(io.catalog_path)?;
    let catalog_base =
        io.catalog_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let enrollment: BTreeMap<String, Vec<String>> =
        load_json(&io.protocol_dir.join("enrollment.json"))?;
    let tse_refs: BTreeMap<String, String> =
        load_json(&io.protocol_dir.join("tse_references.json"))?;
    let trials = load_trials(io.protocol_dir, &manifest)?;

    let bundle = Bundle::new(io.bundle_dir);
    std::fs::create_dir_all(&bundle.root).map_err(FormatError::Io)?;
    let label = attack_label(config);
    let logs = bundle.logs_dir();
    let fingerprint = serde_json::to_string(&(config, tse_spec, embed_spec, cfg.seed))
        .map_err(|e| PipelineError::Invalid(e.to_string()))?;
    let embed_fp = embed_fingerprint(embed_spec, cfg.seed)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count())
        .build()
        .map_err(|e| PipelineError::Invalid(format!("worker pool: {e}")))?;

    // resolve (and where needed anonymize) each distinct reference
    // utterance once, so the per-mixture pass never writes a shared path
    let needed: BTreeSet<&str> = manifest
        .mixtures
        .iter()
        .filter_map(|r| tse_refs.get(&r.mixture_id))
        .map(String::as_str)
        .collect();
    let reference_audio: BTreeMap<String, std::result::Result<PathBuf, String>> = pool
        .install(|| {
            needed
                .par_iter()
                .map(|utt| {
                    let path = (|| -> Result<PathBuf> {
                        let entry = catalog.entry(utt).ok_or_else(|| {
                            PipelineError::Invalid(format!(
                                "reference utterance {utt} not in catalog"
                            ))
                        })?;
                        let original = catalog.resolve_path(&catalog_base, entry);
                        match config.reference_kind {
                            ReferenceKind::Original => Ok(original),
                            ReferenceKind::Anonymized => anonymize_cached(
                                cfg,
                                &bundle,
                                anonymizer.expect("required when references are anonymized"),
                                &original,
                                "attack_refs_anonymized",
                                utt,
                                &logs,
                            ),
                        }
                    })();
                    (utt.to_string(), path.map_err(|e| e.to_string()))
                })
                .collect()
        });

    // enrollment models, anonymized first for the semi-informed attacker
    let embed_call = AdapterCall {
        id: &config.asv_adapter,
        spec: embed_spec,
        logs_dir: &logs,
        seed: cfg.seed,
        oracle: None,
    };
    let enroll_models: BTreeMap<String, Embedding> = match config.attacker_kind {
        AttackerKind::Ignorant => pool.install(|| {
            enrollment_embeddings(
                &embed_fp,
                &bundle,
                &embed_call,
                &catalog,
                &catalog_base,
                &enrollment,
                "enrollment",
                |path, _| Ok(path.to_path_buf()),
            )
        })?,
        AttackerKind::SemiInformed => {
            let anonymizer = anonymizer.expect("required for the semi-informed attacker");
            pool.install(|| {
                enrollment_embeddings(
                    &embed_fp,
                    &bundle,
                    &embed_call,
                    &catalog,
                    &catalog_base,
                    &enrollment,
                    "enrollment_anonymized",
                    |path, utt| {
                        anonymize_cached(
                            cfg,
                            &bundle,
                            anonymizer,
                            path,
                            "enrollment_anonymized",
                            utt,
                            &logs,
                        )
                    },
                )
            })?
        }
    };

    let ctx = AttackCtx {
        cfg,
        config,
        bundle,
        dataset_dir: io.dataset_dir,
        label,
        tse_spec,
        embed_spec,
        fingerprint,
        references,
        tse_refs,
        reference_audio,
    };

    // re-extraction and embedding per mixture
    let results: Vec<std::result::Result<(String, Embedding), FailureRecord>> = pool
        .install(|| manifest.mixtures.par_iter().map(|record| attack_one(&ctx, record)).collect());
    let mut test: HashMap<String, Embedding> = HashMap::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok((id, emb)) => {
                test.insert(id, emb);
            }
            Err(f) => failures.push(f),
        }
    }
    let failures_json = serde_json::to_string_pretty(&failures)
        .map_err(|e| PipelineError::Invalid(e.to_string()))?;
    std::fs::write(ctx.bundle.root.join(format!("{label}_failures.json")), failures_json + "\n")
        .map_err(FormatError::Io)?;

    // score per condition against the attack's enrollment models
    let mut metric = eval::MetricFile::new(label, "eer", "percent");
    let enroll: HashMap<String, Embedding> =
        enroll_models.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    for (tag, trial_list) in &trials {
        let usable: Vec<Trial> =
            trial_list.iter().filter(|t| test.contains_key(&t.test_id)).cloned().collect();
        match eval::score_and_write(&ctx.bundle, label, tag, &usable, &enroll, &test) {
            Ok(value) => {
                metric.values.insert(tag.clone(), Some(value));
            }
            Err(e) => {
                metric.values.insert(tag.clone(), None);
                metric.notes.insert(tag.clone(), e.to_string());
            }
        }
    }
    let metrics_path = ctx.bundle.metric_file(label, "eer");
    metric.write(&metrics_path)?;

    Ok(AttackSummary {
        label: label.into(),
        mixtures: manifest.mixtures.len(),
        scored_mixtures: test.len(),
        failures,
        eer: metric.values,
        metrics_path,
    })
}

fn attack_one(
    ctx: &AttackCtx<'_>,
    record: &MixtureRecord,
) -> std::result::Result<(String, Embedding), FailureRecord> {
    let id = &record.mixture_id;
    let fail = |e: PipelineError| FailureRecord {
        mixture_id: id.clone(),
        stage: ctx.label.into(),
        message: e.to_string(),
    };
    let invalid = |m: String| fail(PipelineError::Invalid(m));

    let recombined_path = ctx.bundle.stage_wav(Stage::Recombined, id);
    if !recombined_path.exists() {
        return Err(invalid("recombined audio missing; run the pipeline first".into()));
    }
    let reference = ctx
        .references
        .get(id)
        .ok_or_else(|| invalid("reference transcript missing".into()))?;
    let ref_utt = ctx
        .tse_refs
        .get(id)
        .ok_or_else(|| invalid(format!("no extraction reference listed for {id}")))?;
    let ref_audio = match ctx.reference_audio.get(ref_utt) {
        Some(Ok(path)) => path.clone(),
        Some(Err(message)) => return Err(invalid(message.clone())),
        None => return Err(invalid(format!("reference utterance {ref_utt} was not resolved"))),
    };

    let extracted_path =
        ctx.bundle.root.join("stages").join(ctx.label).join(format!("{id}.wav"));
    let embedding_path = ctx.bundle.embedding(ctx.label, id);
    let key_path = ctx.bundle.cache_key(ctx.label, id);
    let key = (|| -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(b"attack-v1\n");
        hasher.update(ctx.fingerprint.as_bytes());
        hasher.update(file_sha256(&recombined_path)?.as_bytes());
        hasher.update(file_sha256(&ref_audio)?.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    })()
    .map_err(fail)?;

    if !cache_hit(&key_path, &key, &[extracted_path.clone(), embedding_path.clone()]) {
        let recombined = formats::read_wav(&recombined_path).map_err(|e| fail(e.into()))?;
        let octx = OracleCtx {
            dataset_dir: ctx.dataset_dir,
            record,
            reference,
            stage: Stage::AttackExtracted,
        };
        let logs = ctx.bundle.logs_dir();
        let tse_call = AdapterCall {
            id: &ctx.config.tse_adapter,
            spec: ctx.tse_spec,
            logs_dir: &logs,
            seed: ctx.cfg.seed,
            oracle: Some(&octx),
        };
        stages::run_tse(&tse_call, &recombined_path, &recombined, &ref_audio, &extracted_path)
            .map_err(fail)?;
        let embed_call = AdapterCall {
            id: &ctx.config.asv_adapter,
            spec: ctx.embed_spec,
            logs_dir: &logs,
            seed: ctx.cfg.seed,
            oracle: None,
        };
        embed_call
            .invoke(AdapterIo { input: &extracted_path, reference: None, output: &embedding_path })
            .map_err(fail)?;
        store_cache_key(&key_path, &key).map_err(fail)?;
    }
    let emb = read_embedding_file(&embedding_path, &ctx.config.asv_adapter).map_err(fail)?;
    Ok((id.clone(), emb))
}

/// Anonymize one audio file into the bundle, content-addressed on the
/// anonymizer spec, seed, and input bytes.
fn anonymize_cached(
    cfg: &RunConfig,
    bundle: &Bundle,
    spec: &AdapterSpec,
    input: &Path,
    group: &str,
    name: &str,
    logs: &Path,
) -> Result<PathBuf> {
    let out = bundle.root.join("stages").join(group).join(format!("{name}.wav"));
    let key_path = bundle.cache_key(&format!("anon_{group}"), name);
    let mut hasher = Sha256::new();
    hasher.update(b"anon-v1\n");
    hasher.update(
        serde_json::to_string(&(spec, cfg.seed))
            .map_err(|e| PipelineError::Invalid(e.to_string()))?
            .as_bytes(),
    );
    hasher.update(file_sha256(input)?.as_bytes());
    let key = format!("{:x}", hasher.finalize());
    if !cache_hit(&key_path, &key, std::slice::from_ref(&out)) {
        let wave = formats::read_wav(input)?;
        let call = AdapterCall {
            id: &cfg.roles.anonymizer,
            spec,
            logs_dir: logs,
            seed: cfg.seed,
            oracle: None,
        };
        stages::run_anonymizer(&call, input, &wave, &out)?;
        store_cache_key(&key_path, &key)?;
    }
    Ok(out)
}
