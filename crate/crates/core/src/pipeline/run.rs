//! Dataset-level orchestration: parallel mixture chains, enrollment
//! embeddings, failure accounting, and bundle assembly.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::adapter::{AdapterIo, AdapterKind, AdapterSet, AdapterSpec};
use super::builtins::OracleCtx;
use super::stages::{self, AdapterCall};
use super::{condition_tag, eval, PipelineError, Result, Stage};
use crate::formats::{self, Catalog, FormatError, Manifest};
use crate::model::{Embedding, MixtureRecord, SpeakerActivity, Transcript, Trial};

/// Environment variable overriding the worker-pool width.
pub const WORKERS_ENV: &str = "TSAKIT_WORKERS";

fn default_tcp_collar() -> f64 {
    crate::wer::DEFAULT_COLLAR
}

fn default_der_collar() -> f64 {
    crate::der::DEFAULT_COLLAR
}

/// Which adapter id fills each pipeline role.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Roles {
    pub tse: String,
    pub anonymizer: String,
    pub asr: String,
    pub embedder: String,
    pub diarizer: String,
}

/// Full run configuration, normally loaded from a JSON file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub adapters: AdapterSet,
    pub roles: Roles,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_tcp_collar")]
    pub tcp_collar: f64,
    #[serde(default = "default_der_collar")]
    pub der_collar: f64,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(FormatError::Io)?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
            PipelineError::Invalid(format!("run config {}: {e}", path.display()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.adapters.validate()?;
        self.adapters.get(&self.roles.tse, AdapterKind::Tse)?;
        self.adapters.get(&self.roles.anonymizer, AdapterKind::Anonymizer)?;
        self.adapters.get(&self.roles.asr, AdapterKind::Asr)?;
        self.adapters.get(&self.roles.embedder, AdapterKind::Embedder)?;
        self.adapters.get(&self.roles.diarizer, AdapterKind::Diarizer)?;
        if self.tcp_collar.is_nan() || self.tcp_collar <= 0.0 {
            return Err(PipelineError::Invalid("tcp_collar must be positive".into()));
        }
        if self.der_collar < 0.0 {
            return Err(PipelineError::Invalid("der_collar must not be negative".into()));
        }
        Ok(())
    }

    /// Worker-pool width: explicit config, then the environment override,
    /// then the logical core count.
    pub fn worker_count(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
            .filter(|n| *n > 0)
            .unwrap_or_else(|| {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            })
    }
}

/// Input locations for one run.
#[derive(Debug, Clone, Copy)]
pub struct RunInputs<'a> {
    pub dataset_dir: &'a Path,
    pub protocol_dir: &'a Path,
    pub catalog_path: &'a Path,
    pub bundle_dir: &'a Path,
}

/// One isolated per-mixture failure.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FailureRecord {
    pub mixture_id: String,
    pub stage: String,
    pub message: String,
}

#[derive(Debug)]
pub struct RunSummary {
    pub mixtures: usize,
    pub completed: usize,
    pub failures: Vec<FailureRecord>,
    pub metrics: Vec<PathBuf>,
}

/// Bundle directory layout.
pub(crate) struct Bundle {
    pub root: PathBuf,
}

impl Bundle {
    pub fn new(root: &Path) -> Bundle {
        Bundle { root: root.to_path_buf() }
    }

    pub fn stage_wav(&self, stage: Stage, name: &str) -> PathBuf {
        self.root.join("stages").join(stage.dir_name()).join(format!("{name}.wav"))
    }

    pub fn transcript(&self, stage: Stage, id: &str) -> PathBuf {
        self.root.join("transcripts").join(stage.dir_name()).join(format!("{id}.seglst"))
    }

    pub fn rttm(&self, stage: Stage, id: &str) -> PathBuf {
        self.root.join("diarization").join(stage.dir_name()).join(format!("{id}.rttm"))
    }

    pub fn embedding(&self, group: &str, name: &str) -> PathBuf {
        self.root.join("embeddings").join(group).join(format!("{name}.txt"))
    }

    pub fn scores_file(&self, group: &str, tag: &str, what: &str) -> PathBuf {
        self.root.join("scores").join(group).join(format!("ov{tag}.{what}.txt"))
    }

    pub fn metric_file(&self, stage_label: &str, metric: &str) -> PathBuf {
        self.root.join("metrics").join(format!("{stage_label}_{metric}.json"))
    }

    pub fn logs_dir(&self) -> PathBuf {
        self.root.join("logs")
    }

    pub fn cache_key(&self, group: &str, name: &str) -> PathBuf {
        self.root.join(".cache").join(group).join(format!("{name}.key"))
    }
}

/// Everything loaded once per run and shared across workers.
struct RunContext<'a> {
    cfg: &'a RunConfig,
    bundle: Bundle,
    dataset_dir: &'a Path,
    catalog: Catalog,
    catalog_base: PathBuf,
    references: HashMap<String, Transcript>,
    tse_refs: BTreeMap<String, String>,
    fingerprint: String,
}

impl RunContext<'_> {
    fn adapter(&self, id: &str, kind: AdapterKind) -> &AdapterSpec {
        // validated up front, so lookups cannot fail here
        self.cfg.adapters.get(id, kind).expect("validated adapter")
    }

    fn call<'c>(
        &'c self,
        id: &'c str,
        kind: AdapterKind,
        oracle: Option<&'c OracleCtx<'c>>,
        logs_dir: &'c Path,
    ) -> AdapterCall<'c> {
        AdapterCall {
            id,
            spec: self.adapter(id, kind),
            logs_dir,
            seed: self.cfg.seed,
            oracle,
        }
    }

    fn reference_audio_path(&self, record: &MixtureRecord) -> Result<PathBuf> {
        let utt = self.tse_refs.get(&record.mixture_id).ok_or_else(|| {
            PipelineError::Invalid(format!(
                "no extraction reference listed for {}",
                record.mixture_id
            ))
        })?;
        let entry = self.catalog.entry(utt).ok_or_else(|| {
            PipelineError::Invalid(format!("reference utterance {utt} not in catalog"))
        })?;
        Ok(self.catalog.resolve_path(&self.catalog_base, entry))
    }
}

pub(crate) fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(FormatError::Io)?;
    Ok(format!("{:x}", Sha256::digest(bytes)))
}

/// Cache fingerprint covering only what can change an embedding, so
/// pipeline and attack runs share enrollment vectors.
pub(crate) fn embed_fingerprint(spec: &AdapterSpec, seed: u64) -> Result<String> {
    serde_json::to_string(&(spec, seed)).map_err(|e| PipelineError::Invalid(e.to_string()))
}

/// Read a single-embedding adapter output file.
pub(crate) fn read_embedding_file(path: &Path, id: &str) -> Result<Embedding> {
    let file = std::fs::File::open(path).map_err(FormatError::Io)?;
    let rows = formats::parse_embeddings(std::io::BufReader::new(file))?;
    match rows.into_iter().next() {
        Some((_, emb)) => Ok(emb),
        None => Err(PipelineError::BadOutput {
            id: id.into(),
            message: format!("{} holds no embedding rows", path.display()),
        }),
    }
}

/// Rewrite an ASR adapter output with the session id forced to the mixture
/// id, in canonical form.
fn normalize_transcript(id: &str, raw: &Path, session: &str, out: &Path) -> Result<()> {
    let file = std::fs::File::open(raw).map_err(FormatError::Io)?;
    let parsed = formats::parse_seglst(std::io::BufReader::new(file))
        .map_err(|e| PipelineError::BadOutput { id: id.into(), message: e.to_string() })?;
    let mut t = Transcript::new(session);
    for src in parsed {
        for mut seg in src.segments {
            seg.session_id = session.to_string();
            t.segments.push(seg);
        }
    }
    std::fs::write(out, formats::write_seglst(&[t])).map_err(FormatError::Io)?;
    let _ = std::fs::remove_file(raw);
    Ok(())
}

/// Same normalization for diarizer output.
fn normalize_rttm(id: &str, raw: &Path, session: &str, out: &Path) -> Result<()> {
    let file = std::fs::File::open(raw).map_err(FormatError::Io)?;
    let parsed = formats::parse_rttm(std::io::BufReader::new(file))
        .map_err(|e| PipelineError::BadOutput { id: id.into(), message: e.to_string() })?;
    let mut activity = SpeakerActivity::new(session);
    for src in parsed {
        activity.entries.extend(src.entries);
    }
    std::fs::write(out, formats::write_rttm(&[activity])).map_err(FormatError::Io)?;
    let _ = std::fs::remove_file(raw);
    Ok(())
}

fn write_wav_deep(path: &Path, wave: &crate::model::Waveform) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(FormatError::Io)?;
    }
    formats::write_wav(path, wave)?;
    Ok(())
}

/// Stage artifacts one mixture chain must leave behind.
fn chain_outputs(bundle: &Bundle, id: &str) -> Vec<PathBuf> {
    let mut v = vec![
        bundle.stage_wav(Stage::Extracted, id),
        bundle.stage_wav(Stage::Anonymized, id),
        bundle.stage_wav(Stage::Residual, id),
        bundle.stage_wav(Stage::Recombined, id),
        bundle.rttm(Stage::Original, id),
        bundle.rttm(Stage::Recombined, id),
        bundle.embedding("extracted", id),
        bundle.embedding("anonymized", id),
    ];
    for stage in [Stage::Original, Stage::Extracted, Stage::Anonymized, Stage::Recombined] {
        v.push(bundle.transcript(stage, id));
    }
    v
}

fn chain_key(ctx: &RunContext<'_>, record: &MixtureRecord, reference: &Transcript) -> Result<String> {
    let mixture_wav = ctx.dataset_dir.join("wav").join(format!("{}.wav", record.mixture_id));
    let stem_wav =
        ctx.dataset_dir.join("stems").join(format!("{}.target.wav", record.mixture_id));
    let ref_audio = ctx.reference_audio_path(record)?;
    let mut hasher = Sha256::new();
    hasher.update(b"chain-v1\n");
    hasher.update(ctx.fingerprint.as_bytes());
    hasher.update(
        serde_json::to_string(record)
            .map_err(|e| PipelineError::Invalid(e.to_string()))?
            .as_bytes(),
    );
    hasher.update(formats::write_seglst(std::slice::from_ref(reference)).as_bytes());
    hasher.update(file_sha256(&mixture_wav)?.as_bytes());
    hasher.update(file_sha256(&ref_audio)?.as_bytes());
    if stem_wav.exists() {
        hasher.update(file_sha256(&stem_wav)?.as_bytes());
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// True when a cached key matches and every listed output exists.
pub(crate) fn cache_hit(key_path: &Path, key: &str, outputs: &[PathBuf]) -> bool {
    match std::fs::read_to_string(key_path) {
        Ok(existing) if existing == key => outputs.iter().all(|p| p.exists()),
        _ => false,
    }
}

pub(crate) fn store_cache_key(key_path: &Path, key: &str) -> Result<()> {
    if let Some(parent) = key_path.parent() {
        std::fs::create_dir_all(parent).map_err(FormatError::Io)?;
    }
    std::fs::write(key_path, key).map_err(FormatError::Io)?;
    Ok(())
}

fn process_mixture(
    ctx: &RunContext<'_>,
    record: &MixtureRecord,
    reference: &Transcript,
) -> std::result::Result<(), FailureRecord> {
    let id = &record.mixture_id;
    let fail = |stage: &str, e: PipelineError| FailureRecord {
        mixture_id: id.clone(),
        stage: stage.into(),
        message: e.to_string(),
    };

    let key = chain_key(ctx, record, reference).map_err(|e| fail("inputs", e))?;
    let key_path = ctx.bundle.cache_key("chain", id);
    if cache_hit(&key_path, &key, &chain_outputs(&ctx.bundle, id)) {
        log::debug!("{id}: chain up to date, skipping");
        return Ok(());
    }

    let logs = ctx.bundle.logs_dir();
    let mixture_path = ctx.dataset_dir.join("wav").join(format!("{id}.wav"));
    let mixture =
        formats::read_wav(&mixture_path).map_err(|e| fail("inputs", e.into()))?;
    let ref_audio = ctx.reference_audio_path(record).map_err(|e| fail("inputs", e))?;

    let oracle = |stage: Stage| OracleCtx {
        dataset_dir: ctx.dataset_dir,
        record,
        reference,
        stage,
    };

    // extraction
    let extracted_path = ctx.bundle.stage_wav(Stage::Extracted, id);
    let octx = oracle(Stage::Extracted);
    let call = ctx.call(&ctx.cfg.roles.tse, AdapterKind::Tse, Some(&octx), &logs);
    let extracted = stages::run_tse(&call, &mixture_path, &mixture, &ref_audio, &extracted_path)
        .map_err(|e| fail("extracted", e))?;

    // anonymization
    let anonymized_path = ctx.bundle.stage_wav(Stage::Anonymized, id);
    let octx = oracle(Stage::Anonymized);
    let call = ctx.call(&ctx.cfg.roles.anonymizer, AdapterKind::Anonymizer, Some(&octx), &logs);
    let anonymized = stages::run_anonymizer(&call, &extracted_path, &extracted, &anonymized_path)
        .map_err(|e| fail("anonymized", e))?;

    // residual and recombination
    let residual = stages::compute_residual(&mixture, &extracted)
        .map_err(|e| fail("residual", e))?;
    let residual_path = ctx.bundle.stage_wav(Stage::Residual, id);
    write_wav_deep(&residual_path, &residual).map_err(|e| fail("residual", e))?;
    let recombined =
        stages::recombine(&anonymized, &residual).map_err(|e| fail("recombined", e))?;
    let recombined_path = ctx.bundle.stage_wav(Stage::Recombined, id);
    write_wav_deep(&recombined_path, &recombined).map_err(|e| fail("recombined", e))?;

    // transcription of every evaluated stream
    let asr_stages = [
        (Stage::Original, mixture_path.clone()),
        (Stage::Extracted, extracted_path.clone()),
        (Stage::Anonymized, anonymized_path.clone()),
        (Stage::Recombined, recombined_path.clone()),
    ];
    for (stage, wav) in &asr_stages {
        let out = ctx.bundle.transcript(*stage, id);
        let raw = out.with_extension("raw.seglst");
        let octx = oracle(*stage);
        let call = ctx.call(&ctx.cfg.roles.asr, AdapterKind::Asr, Some(&octx), &logs);
        let label = format!("transcribe {}", stage.dir_name());
        call.invoke(AdapterIo { input: wav, reference: None, output: &raw })
            .and_then(|()| normalize_transcript(call.id, &raw, id, &out))
            .map_err(|e| fail(&label, e))?;
    }

    // diarization of the mixture-like streams
    for (stage, wav) in [(Stage::Original, &mixture_path), (Stage::Recombined, &recombined_path)] {
        let out = ctx.bundle.rttm(stage, id);
        let raw = out.with_extension("raw.rttm");
        let octx = oracle(stage);
        let call = ctx.call(&ctx.cfg.roles.diarizer, AdapterKind::Diarizer, Some(&octx), &logs);
        let label = format!("diarize {}", stage.dir_name());
        call.invoke(AdapterIo { input: wav, reference: None, output: &raw })
            .and_then(|()| normalize_rttm(call.id, &raw, id, &out))
            .map_err(|e| fail(&label, e))?;
    }

    // speaker embeddings of the extraction-side streams
    for (stage, wav) in
        [(Stage::Extracted, &extracted_path), (Stage::Anonymized, &anonymized_path)]
    {
        let out = ctx.bundle.embedding(stage.dir_name(), id);
        let octx = oracle(stage);
        let call = ctx.call(&ctx.cfg.roles.embedder, AdapterKind::Embedder, Some(&octx), &logs);
        let label = format!("embed {}", stage.dir_name());
        call.invoke(AdapterIo { input: wav, reference: None, output: &out })
            .and_then(|()| read_embedding_file(&out, call.id).map(|_| ()))
            .map_err(|e| fail(&label, e))?;
    }

    store_cache_key(&key_path, &key).map_err(|e| fail("cache", e))?;
    Ok(())
}

/// Embed one audio file through the configured embedder, content-addressed
/// so reruns reuse the stored vector.
pub(crate) fn embed_cached(
    ctx_fingerprint: &str,
    bundle: &Bundle,
    call: &AdapterCall<'_>,
    wav: &Path,
    group: &str,
    name: &str,
) -> Result<Embedding> {
    let out = bundle.embedding(group, name);
    let key_path = bundle.cache_key(&format!("embed_{group}"), name);
    let mut hasher = Sha256::new();
    hasher.update(b"embed-v1\n");
    hasher.update(ctx_fingerprint.as_bytes());
    hasher.update(file_sha256(wav)?.as_bytes());
    let key = format!("{:x}", hasher.finalize());
    if !cache_hit(&key_path, &key, std::slice::from_ref(&out)) {
        call.invoke(AdapterIo { input: wav, reference: None, output: &out })?;
        store_cache_key(&key_path, &key)?;
    }
    read_embedding_file(&out, call.id)
}

/// Average the enrollment utterance embeddings per speaker.
#[allow(clippy::too_many_arguments)]
pub(crate) fn enrollment_embeddings(
    fingerprint: &str,
    bundle: &Bundle,
    call: &AdapterCall<'_>,
    catalog: &Catalog,
    catalog_base: &Path,
    enrollment: &BTreeMap<String, Vec<String>>,
    group: &str,
    prepare: impl Fn(&Path, &str) -> Result<PathBuf> + Sync,
) -> Result<BTreeMap<String, Embedding>> {
    let mut out = BTreeMap::new();
    for (speaker, utterances) in enrollment {
        let embeddings = utterances
            .par_iter()
            .map(|utt| {
                let entry = catalog.entry(utt).ok_or_else(|| {
                    PipelineError::Invalid(format!("enrollment utterance {utt} not in catalog"))
                })?;
                let wav = prepare(&catalog.resolve_path(catalog_base, entry), utt)?;
                embed_cached(fingerprint, bundle, call, &wav, group, utt)
            })
            .collect::<Result<Vec<Embedding>>>()?;
        out.insert(speaker.clone(), crate::asv::average_embedding(&embeddings)?);
    }
    Ok(out)
}

/// Load the per-condition trial lists the protocol directory provides for
/// this manifest.
pub(crate) fn load_trials(
    protocol_dir: &Path,
    manifest: &Manifest,
) -> Result<BTreeMap<String, Vec<Trial>>> {
    let mut out = BTreeMap::new();
    for record in &manifest.mixtures {
        let tag = condition_tag(record.overlap_requested);
        if out.contains_key(&tag) {
            continue;
        }
        let path = protocol_dir.join("trials").join(format!("ov{tag}.txt"));
        let file = std::fs::File::open(&path).map_err(|e| {
            PipelineError::Invalid(format!("trial list {}: {e}", path.display()))
        })?;
        let trials = formats::parse_trials(std::io::BufReader::new(file))?;
        out.insert(tag, trials);
    }
    Ok(out)
}

pub(crate) fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        PipelineError::Invalid(format!("{}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::Invalid(format!("{}: {e}", path.display())))
}

/// Map session id to reference transcript from the dataset's seglst.
pub(crate) fn load_references(dataset_dir: &Path) -> Result<HashMap<String, Transcript>> {
    let path = dataset_dir.join("reference.seglst");
    let file = std::fs::File::open(&path).map_err(|e| {
        PipelineError::Invalid(format!("reference transcript {}: {e}", path.display()))
    })?;
    let transcripts = formats::parse_seglst(std::io::BufReader::new(file))?;
    Ok(transcripts.into_iter().map(|t| (t.session_id.clone(), t)).collect())
}

fn config_fingerprint(cfg: &RunConfig) -> Result<String> {
    #[derive(serde::Serialize)]
    struct Fingerprint<'a> {
        seed: u64,
        tse: &'a AdapterSpec,
        anonymizer: &'a AdapterSpec,
        asr: &'a AdapterSpec,
        embedder: &'a AdapterSpec,
        diarizer: &'a AdapterSpec,
    }
    let fp = Fingerprint {
        seed: cfg.seed,
        tse: cfg.adapters.get(&cfg.roles.tse, AdapterKind::Tse)?,
        anonymizer: cfg.adapters.get(&cfg.roles.anonymizer, AdapterKind::Anonymizer)?,
        asr: cfg.adapters.get(&cfg.roles.asr, AdapterKind::Asr)?,
        embedder: cfg.adapters.get(&cfg.roles.embedder, AdapterKind::Embedder)?,
        diarizer: cfg.adapters.get(&cfg.roles.diarizer, AdapterKind::Diarizer)?,
    };
    serde_json::to_string(&fp).map_err(|e| PipelineError::Invalid(e.to_string()))
}

/// Run the full chain over every manifest mixture and evaluate the bundle.
///
/// Per-mixture failures are recorded in `failures.json` and never abort
/// the run; only configuration problems do.
pub fn run_dataset(cfg: &RunConfig, io: &RunInputs<'_>) -> Result<RunSummary> {
    cfg.validate()?;
    let manifest = formats::read_manifest(io.dataset_dir.join("manifest.json"))?;
    let references = load_references(io.dataset_dir)?;
    for record in &manifest.mixtures {
        if !references.contains_key(&record.mixture_id) {
            return Err(PipelineError::Invalid(format!(
                "reference transcript missing for {}",
                record.mixture_id
            )));
        }
    }
    let catalog = formats::read_catalog(io.catalog_path)?;
    let catalog_base =
        io.catalog_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let enrollment: BTreeMap<String, Vec<String>> =
        load_json(&io.protocol_dir.join("enrollment.json"))?;
    let tse_refs: BTreeMap<String, String> =
        load_json(&io.protocol_dir.join("tse_references.json"))?;
    let trials = load_trials(io.protocol_dir, &manifest)?;

    let ctx = RunContext {
        cfg,
        bundle: Bundle::new(io.bundle_dir),
        dataset_dir: io.dataset_dir,
        catalog,
        catalog_base,
        references,
        tse_refs,
        fingerprint: config_fingerprint(cfg)?,
    };
    std::fs::create_dir_all(&ctx.bundle.root).map_err(FormatError::Io)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count())
        .build()
        .map_err(|e| PipelineError::Invalid(format!("worker pool: {e}")))?;
    let results: Vec<std::result::Result<(), FailureRecord>> = pool.install(|| {
        manifest
            .mixtures
            .par_iter()
            .map(|record| process_mixture(&ctx, record, &ctx.references[&record.mixture_id]))
            .collect()
    });

    let ok: Vec<bool> = results.iter().map(|r| r.is_ok()).collect();
    let failures: Vec<FailureRecord> =
        results.into_iter().filter_map(|r| r.err()).collect();
    let failures_json = serde_json::to_string_pretty(&failures)
        .map_err(|e| PipelineError::Invalid(e.to_string()))?;
    std::fs::write(ctx.bundle.root.join("failures.json"), failures_json + "\n")
        .map_err(FormatError::Io)?;

    // enrollment models from original audio
    let logs = ctx.bundle.logs_dir();
    let embed_call = ctx.call(&cfg.roles.embedder, AdapterKind::Embedder, None, &logs);
    let embed_fp = embed_fingerprint(embed_call.spec, cfg.seed)?;
    let enroll_embeddings = pool.install(|| {
        enrollment_embeddings(
            &embed_fp,
            &ctx.bundle,
            &embed_call,
            &ctx.catalog,
            &ctx.catalog_base,
            &enrollment,
            "enrollment",
            |path, _| Ok(path.to_path_buf()),
        )
    })?;
    let rows: Vec<(String, Embedding)> =
        enroll_embeddings.iter().map(|(s, e)| (s.clone(), e.clone())).collect();
    let enrollment_txt = ctx.bundle.root.join("embeddings").join("enrollment.txt");
    std::fs::create_dir_all(enrollment_txt.parent().expect("has parent"))
        .map_err(FormatError::Io)?;
    std::fs::write(enrollment_txt, formats::write_embeddings(&rows)).map_err(FormatError::Io)?;

    let metrics = eval::evaluate(&eval::EvalCtx {
        cfg,
        bundle: &ctx.bundle,
        dataset_dir: io.dataset_dir,
        manifest: &manifest,
        references: &ctx.references,
        ok: &ok,
        trials: &trials,
        enrollment: &enroll_embeddings,
    })?;

    Ok(RunSummary {
        mixtures: manifest.mixtures.len(),
        completed: ok.iter().filter(|b| **b).count(),
        failures,
        metrics,
    })
}
