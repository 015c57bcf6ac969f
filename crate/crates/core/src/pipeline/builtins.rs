//! Built-in adapters: ground-truth oracles and deterministic stubs.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::adapter::{AdapterIo, Builtin};
use super::{PipelineError, Result, Stage};
use crate::formats::{self, FormatError};
use crate::model::{Embedding, MixtureRecord, Transcript, Waveform};

/// Dimension of hash-embedder vectors.
pub const HASH_EMBEDDING_DIM: usize = 16;

/// Stub anonymizer frame size in samples.
pub const STUB_FRAME: usize = 50;

/// Ground truth a built-in oracle may consult.
pub struct OracleCtx<'a> {
    pub dataset_dir: &'a Path,
    pub record: &'a MixtureRecord,
    pub reference: &'a Transcript,
    pub stage: Stage,
}

pub fn run_builtin(
    id: &str,
    builtin: &Builtin,
    io: AdapterIo<'_>,
    ctx: Option<&OracleCtx<'_>>,
    seed: u64,
) -> Result<()> {
    let need_ctx = || -> Result<&OracleCtx<'_>> {
        ctx.ok_or_else(|| PipelineError::Config {
            id: id.into(),
            message: "builtin needs dataset context but the call has none".into(),
        })
    };
    match builtin {
        Builtin::OracleTse => {
            let ctx = need_ctx()?;
            let stem = ctx
                .dataset_dir
                .join("stems")
                .join(format!("{}.target.wav", ctx.record.mixture_id));
            let wave = formats::read_wav(stem)?;
            formats::write_wav(io.output, &wave)?;
        }
        Builtin::PassthroughAnonymizer => {
            let wave = formats::read_wav(io.input)?;
            formats::write_wav(io.output, &wave)?;
        }
        Builtin::StubAnonymizer => {
            let wave = formats::read_wav(io.input)?;
            formats::write_wav(io.output, &stub_anonymize(&wave, seed))?;
        }
        Builtin::OracleAsr => {
            let ctx = need_ctx()?;
            let t = oracle_transcript(ctx);
            std::fs::write(io.output, formats::write_seglst(&[t])).map_err(FormatError::Io)?;
        }
        Builtin::OracleDiarizer => {
            let ctx = need_ctx()?;
            let rttm = formats::write_rttm(std::slice::from_ref(&ctx.record.activity));
            std::fs::write(io.output, rttm).map_err(FormatError::Io)?;
        }
        Builtin::HashEmbedder => {
            let bytes = std::fs::read(io.input).map_err(FormatError::Io)?;
            let emb = hash_embedding(&bytes);
            let name = io.input.file_stem().map(|s| s.to_string_lossy().into_owned());
            let row = (name.unwrap_or_else(|| "embedding".into()), emb);
            std::fs::write(io.output, formats::write_embeddings(&[row]))
                .map_err(FormatError::Io)?;
        }
        Builtin::FailOn { mixture_id, inner } => {
            if ctx.is_some_and(|c| c.record.mixture_id == *mixture_id) {
                return Err(PipelineError::Injected(mixture_id.clone()));
            }
            run_builtin(id, inner, io, ctx, seed)?;
        }
    }
    Ok(())
}

/// Polarity inversion plus a seeded circular shuffle of whole 50-sample
/// frames; the partial tail frame stays in place. Length-preserving and
/// deterministic, nothing more.
pub fn stub_anonymize(wave: &Waveform, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = wave.samples.len() / STUB_FRAME;
    let mut order: Vec<usize> = (0..frames).collect();
    order.shuffle(&mut rng);
    let mut samples = Vec::with_capacity(wave.samples.len());
    for &src in &order {
        let frame = &wave.samples[src * STUB_FRAME..(src + 1) * STUB_FRAME];
        samples.extend(frame.iter().map(|s| -s));
    }
    samples.extend(wave.samples[frames * STUB_FRAME..].iter().map(|s| -s));
    Waveform { samples, sample_rate: wave.sample_rate }
}

/// Unit vector generated from the sha256 of the input bytes. Identical
/// bytes give identical embeddings; unrelated bytes give unrelated ones.
pub fn hash_embedding(bytes: &[u8]) -> Embedding {
    let digest = Sha256::digest(bytes);
    let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..HASH_EMBEDDING_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    Embedding::new(values)
}

/// Reference segments appropriate for a stage: target-only streams for the
/// extraction side, the nontarget stream for the residual, everything for
/// mixture-like audio.
fn oracle_transcript(ctx: &OracleCtx<'_>) -> Transcript {
    let mut t = Transcript::new(&ctx.record.mixture_id);
    let target = &ctx.record.target_source.speaker_id;
    for seg in &ctx.reference.segments {
        let keep = match ctx.stage {
            Stage::Extracted | Stage::Anonymized | Stage::AttackExtracted => {
                seg.speaker_id == *target
            }
            Stage::Residual => seg.speaker_id != *target,
            Stage::Original | Stage::Recombined => true,
        };
        if keep {
            t.segments.push(seg.clone());
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActivityEntry, Segment, SourceRef, SpeakerActivity};

    fn record(id: &str) -> MixtureRecord {
        let mut activity = SpeakerActivity::new(id);
        activity.entries.push(ActivityEntry::new("spkA", 0.0, 2.0));
        activity.entries.push(ActivityEntry::new("spkB", 1.6, 2.0));
        MixtureRecord {
            mixture_id: id.into(),
            target_source: SourceRef {
                utterance_id: "uA".into(),
                speaker_id: "spkA".into(),
                offset: 0.0,
                gain: 1.0,
            },
            nontarget_source: SourceRef {
                utterance_id: "uB".into(),
                speaker_id: "spkB".into(),
                offset: 1.6,
                gain: 1.0,
            },
            overlap_requested: 0.2,
            overlap_measured: 0.2,
            activity,
        }
    }

    fn reference(id: &str) -> Transcript {
        let mut t = Transcript::new(id);
        t.segments.push(Segment::with_text(id, "spkA", 0.0, 2.0, "hello there"));
        t.segments.push(Segment::with_text(id, "spkB", 1.6, 3.6, "general words"));
        t
    }

    #[test]
    fn stub_anonymizer_is_deterministic_and_length_preserving() {
        let wave = Waveform::new((0..517).map(|i| (i as f64 / 100.0).sin() * 0.4).collect(), 16_000);
        let a = stub_anonymize(&wave, 9);
        let b = stub_anonymize(&wave, 9);
        let c = stub_anonymize(&wave, 10);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.samples.len(), wave.samples.len());
        assert_ne!(a.samples, wave.samples);
        assert_ne!(a.samples, c.samples);
        // tail beyond the last whole frame is only negated
        assert_eq!(a.samples[510], -wave.samples[510]);
    }

    #[test]
    fn hash_embedding_is_unit_norm_and_input_sensitive() {
        let a = hash_embedding(b"one input");
        let b = hash_embedding(b"one input");
        let c = hash_embedding(b"another input");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.dim, HASH_EMBEDDING_DIM);
        let norm: f64 = a.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_asr_filters_by_stage() {
        let rec = record("m1");
        let refr = reference("m1");
        let mk = |stage| OracleCtx {
            dataset_dir: Path::new("/nonexistent"),
            record: &rec,
            reference: &refr,
            stage,
        };
        let t = oracle_transcript(&mk(Stage::Extracted));
        assert_eq!(t.segments.len(), 1);
        assert_eq!(t.segments[0].speaker_id, "spkA");
        let t = oracle_transcript(&mk(Stage::Residual));
        assert_eq!(t.segments.len(), 1);
        assert_eq!(t.segments[0].speaker_id, "spkB");
        let t = oracle_transcript(&mk(Stage::Recombined));
        assert_eq!(t.segments.len(), 2);
    }

    #[test]
    fn fail_on_matches_only_its_mixture() {
        let dir = tempfile::tempdir().unwrap();
        let rec = record("m_bad");
        let refr = reference("m_bad");
        let ctx = OracleCtx {
            dataset_dir: dir.path(),
            record: &rec,
            reference: &refr,
            stage: Stage::Original,
        };
        let out = dir.path().join("out.rttm");
        let b = Builtin::FailOn {
            mixture_id: "m_bad".into(),
            inner: Box::new(Builtin::OracleDiarizer),
        };
        let io = AdapterIo { input: &out, reference: None, output: &out };
        let err = run_builtin("x", &b, io, Some(&ctx), 0).unwrap_err();
        assert!(matches!(err, PipelineError::Injected(ref m) if m == "m_bad"));

        let other = Builtin::FailOn {
            mixture_id: "different".into(),
            inner: Box::new(Builtin::OracleDiarizer),
        };
        run_builtin("x", &other, io, Some(&ctx), 0).unwrap();
        assert!(out.exists());
    }

    #[test]
    fn oracle_builtin_without_context_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, b"").unwrap();
        let io = AdapterIo { input: &p, reference: None, output: &p };
        let err = run_builtin("a", &Builtin::OracleTse, io, None, 0).unwrap_err();
        assert!(err.to_string().contains("context"));
    }
}
