//! Single-mixture stage operations and their audio contracts.

use std::path::{Path, PathBuf};

use super::adapter::{AdapterIo, AdapterSpec};
use super::builtins::{run_builtin, OracleCtx};
use super::{PipelineError, Result};
use crate::formats;
use crate::model::Waveform;
use crate::signal;

/// Anonymizers may drift this far from the input duration before the
/// output stops being temporally usable.
pub const DURATION_DRIFT_LIMIT_PERCENT: f64 = 2.0;

/// One adapter invocation bound to its id, spec, and run context.
pub struct AdapterCall<'a> {
    pub id: &'a str,
    pub spec: &'a AdapterSpec,
    /// Root for exec adapter logs; builtins do not log.
    pub logs_dir: &'a Path,
    pub seed: u64,
    pub oracle: Option<&'a OracleCtx<'a>>,
}

impl AdapterCall<'_> {
    /// Run the adapter on one file triple. Exec logs land under
    /// `logs/<adapter_id>/<output_dir>_<output_stem>.log`; the directory
    /// part keeps multi-stage calls on the same mixture apart.
    pub fn invoke(&self, io: AdapterIo<'_>) -> Result<()> {
        if let Some(parent) = io.output.parent() {
            std::fs::create_dir_all(parent).map_err(formats::FormatError::Io)?;
        }
        if let Some(builtin) = self.spec.builtin() {
            return run_builtin(self.id, &builtin, io, self.oracle, self.seed);
        }
        let stem = io
            .output
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "call".into());
        let dir = io
            .output
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned());
        let name = match dir {
            Some(d) => format!("{d}_{stem}.log"),
            None => format!("{stem}.log"),
        };
        let log = self.logs_dir.join(self.id).join(name);
        super::adapter::run_exec(self.id, self.spec, io, &log)
    }

    /// Run the adapter into a scratch file next to `final_path` and read
    /// the waveform back, for stages that post-process the audio.
    fn invoke_wav(
        &self,
        input: &Path,
        reference: Option<&Path>,
        final_path: &Path,
    ) -> Result<(Waveform, PathBuf)> {
        let tmp = final_path.with_extension("tmp.wav");
        self.invoke(AdapterIo { input, reference, output: &tmp })?;
        let wave = formats::read_wav(&tmp).map_err(|e| PipelineError::BadOutput {
            id: self.id.into(),
            message: e.to_string(),
        })?;
        Ok((wave, tmp))
    }
}

/// Extract the target speaker from a mixture. The result always has the
/// mixture's sample rate and exact length; small length deviations are
/// padded or truncated with a warning.
pub fn run_tse(
    call: &AdapterCall<'_>,
    mixture_path: &Path,
    mixture: &Waveform,
    reference_path: &Path,
    out_path: &Path,
) -> Result<Waveform> {
    let (mut wave, tmp) = call.invoke_wav(mixture_path, Some(reference_path), out_path)?;
    if wave.sample_rate != mixture.sample_rate {
        let _ = std::fs::remove_file(&tmp);
        return Err(PipelineError::WrongRate {
            stage: "extracted",
            got: wave.sample_rate,
            want: mixture.sample_rate,
        });
    }
    if wave.samples.len() != mixture.samples.len() {
        log::warn!(
            "{}: extracted length {} != mixture length {}, fixing up",
            call.id,
            wave.samples.len(),
            mixture.samples.len()
        );
        wave.samples.resize(mixture.samples.len(), 0.0);
    }
    formats::write_wav(out_path, &wave)?;
    let _ = std::fs::remove_file(&tmp);
    Ok(wave)
}

/// Anonymize extracted audio. Duration drift beyond
/// [`DURATION_DRIFT_LIMIT_PERCENT`] is an error; anything smaller is
/// aligned back to the input length with a warning.
pub fn run_anonymizer(
    call: &AdapterCall<'_>,
    extracted_path: &Path,
    extracted: &Waveform,
    out_path: &Path,
) -> Result<Waveform> {
    let (mut wave, tmp) = call.invoke_wav(extracted_path, None, out_path)?;
    if wave.sample_rate != extracted.sample_rate {
        let _ = std::fs::remove_file(&tmp);
        return Err(PipelineError::WrongRate {
            stage: "anonymized",
            got: wave.sample_rate,
            want: extracted.sample_rate,
        });
    }
    let want = extracted.samples.len();
    let got = wave.samples.len();
    if got != want {
        let drift = (got as f64 - want as f64).abs() / want as f64 * 100.0;
        if drift > DURATION_DRIFT_LIMIT_PERCENT {
            let _ = std::fs::remove_file(&tmp);
            return Err(PipelineError::DurationDrift {
                percent: drift,
                limit: DURATION_DRIFT_LIMIT_PERCENT,
            });
        }
        log::warn!(
            "{}: anonymized length {got} != extracted length {want} ({drift:.2}% drift), fixing up",
            call.id
        );
        wave.samples.resize(want, 0.0);
    }
    formats::write_wav(out_path, &wave)?;
    let _ = std::fs::remove_file(&tmp);
    Ok(wave)
}

/// What the mixture contains besides the extraction.
pub fn compute_residual(mixture: &Waveform, extracted: &Waveform) -> Result<Waveform> {
    Ok(signal::subtract(mixture, extracted)?)
}

/// Put the anonymized target back on top of the residual.
pub fn recombine(anonymized: &Waveform, residual: &Waveform) -> Result<Waveform> {
    Ok(signal::add(anonymized, residual)?)
}
