//! Adapter configuration and invocation.
//!
//! An adapter is either a built-in (oracles and stubs for model-free runs)
//! or an executable called once per file with `{in}`, `{ref}`, `{out}`
//! placeholders substituted into its argument template. Exit 0 means
//! success; stdout and stderr go to a per-call log.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::{PipelineError, Result};

/// Role an adapter plays in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Tse,
    Anonymizer,
    Asr,
    Embedder,
    Diarizer,
}

impl AdapterKind {
    /// Placeholders an exec template of this kind must substitute.
    pub fn required_placeholders(&self) -> &'static [&'static str] {
        match self {
            AdapterKind::Tse => &["{in}", "{ref}", "{out}"],
            _ => &["{in}", "{out}"],
        }
    }
}

impl std::fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AdapterKind::Tse => "tse",
            AdapterKind::Anonymizer => "anonymizer",
            AdapterKind::Asr => "asr",
            AdapterKind::Embedder => "embedder",
            AdapterKind::Diarizer => "diarizer",
        };
        f.write_str(s)
    }
}

pub const DEFAULT_TIMEOUT_SECS: u64 = 600;

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECS
}

/// One adapter definition: a built-in name or an executable template.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdapterSpec {
    pub kind: AdapterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workdir: Option<PathBuf>,
}

/// Built-in adapter behaviors. Oracles read dataset ground truth; stubs
/// exist to exercise plumbing deterministically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Builtin {
    /// Returns the ground-truth target stem for the mixture.
    OracleTse,
    /// Output equals input.
    PassthroughAnonymizer,
    /// Polarity inversion plus a seeded shuffle of 50-sample frames.
    /// Deliberately crude; changes the signal without changing its length.
    StubAnonymizer,
    /// Emits the reference segments appropriate for the stage.
    OracleAsr,
    /// Emits the ground-truth speaker activity.
    OracleDiarizer,
    /// Embedding drawn from a generator seeded by the input file's sha256.
    HashEmbedder,
    /// Fails on one mixture id, delegates everywhere else.
    FailOn { mixture_id: String, inner: Box<Builtin> },
}

/// Built-in names accepted in adapter configs.
pub fn builtin_ids() -> &'static [&'static str] {
    &[
        "oracle-tse",
        "passthrough-anonymizer",
        "stub-anonymizer",
        "oracle-asr",
        "oracle-diarizer",
        "hash-embedder",
        "fail-on:<mixture_id>:<builtin>",
    ]
}

impl Builtin {
    pub fn parse(name: &str) -> Option<Builtin> {
        match name {
            "oracle-tse" => Some(Builtin::OracleTse),
            "passthrough-anonymizer" => Some(Builtin::PassthroughAnonymizer),
            "stub-anonymizer" => Some(Builtin::StubAnonymizer),
            "oracle-asr" => Some(Builtin::OracleAsr),
            "oracle-diarizer" => Some(Builtin::OracleDiarizer),
            "hash-embedder" => Some(Builtin::HashEmbedder),
            _ => {
                let rest = name.strip_prefix("fail-on:")?;
                let (mixture_id, inner) = rest.split_once(':')?;
                Some(Builtin::FailOn {
                    mixture_id: mixture_id.to_string(),
                    inner: Box::new(Builtin::parse(inner)?),
                })
            }
        }
    }
}

impl AdapterSpec {
    pub fn validate(&self, id: &str) -> Result<()> {
        let config_err = |message: String| PipelineError::Config { id: id.into(), message };
        match (&self.builtin, &self.exec) {
            (Some(_), Some(_)) => {
                return Err(config_err("give either builtin or exec, not both".into()))
            }
            (None, None) => return Err(config_err("missing builtin or exec".into())),
            (Some(name), None) => {
                if Builtin::parse(name).is_none() {
                    return Err(config_err(format!(
                        "unknown builtin {name:?}; known: {}",
                        builtin_ids().join(", ")
                    )));
                }
            }
            (None, Some(_)) => {
                for ph in self.kind.required_placeholders() {
                    if !self.args.iter().any(|a| a.contains(ph)) {
                        return Err(config_err(format!(
                            "{} template must contain the {ph} placeholder",
                            self.kind
                        )));
                    }
                }
            }
        }
        if self.timeout_secs == 0 {
            return Err(config_err("timeout_secs must be positive".into()));
        }
        Ok(())
    }

    pub fn builtin(&self) -> Option<Builtin> {
        self.builtin.as_deref().and_then(Builtin::parse)
    }
}

/// The adapter table of a run config, keyed by adapter id.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct AdapterSet(pub BTreeMap<String, AdapterSpec>);

impl AdapterSet {
    pub fn validate(&self) -> Result<()> {
        for (id, spec) in &self.0 {
            spec.validate(id)?;
        }
        Ok(())
    }

    /// Look up an adapter and check it has the expected kind.
    pub fn get(&self, id: &str, kind: AdapterKind) -> Result<&AdapterSpec> {
        let spec = self.0.get(id).ok_or_else(|| PipelineError::Config {
            id: id.into(),
            message: "not defined in the adapter table".into(),
        })?;
        if spec.kind != kind {
            return Err(PipelineError::Config {
                id: id.into(),
                message: format!("has kind {}, expected {kind}", spec.kind),
            });
        }
        Ok(spec)
    }
}

/// File slots for one adapter call.
#[derive(Debug, Clone, Copy)]
pub struct AdapterIo<'a> {
    pub input: &'a Path,
    pub reference: Option<&'a Path>,
    pub output: &'a Path,
}

/// Run an exec adapter once, streaming stdout and stderr to `log_path`.
/// Polls for completion and kills the child at the timeout.
pub fn run_exec(id: &str, spec: &AdapterSpec, io: AdapterIo<'_>, log_path: &Path) -> Result<()> {
    let exec = spec.exec.as_ref().expect("exec adapter");
    let substitute = |arg: &str| -> Result<String> {
        let mut s = arg.replace("{in}", &io.input.to_string_lossy());
        s = s.replace("{out}", &io.output.to_string_lossy());
        if s.contains("{ref}") {
            let r = io.reference.ok_or_else(|| PipelineError::Config {
                id: id.into(),
                message: "template uses {ref} but the call has no reference file".into(),
            })?;
            s = s.replace("{ref}", &r.to_string_lossy());
        }
        Ok(s)
    };
    let args: Vec<String> =
        spec.args.iter().map(|a| substitute(a)).collect::<Result<Vec<_>>>()?;

    if let Some(parent) = log_path.parent() {
        std::fs::create_dir_all(parent).map_err(crate::formats::FormatError::Io)?;
    }
    let log = std::fs::File::create(log_path).map_err(crate::formats::FormatError::Io)?;
    let log_err = log.try_clone().map_err(crate::formats::FormatError::Io)?;

    let mut cmd = std::process::Command::new(exec);
    cmd.args(&args).stdout(log).stderr(log_err).stdin(std::process::Stdio::null());
    if let Some(dir) = &spec.workdir {
        cmd.current_dir(dir);
    }
    let mut child = cmd.spawn().map_err(|e| PipelineError::Config {
        id: id.into(),
        message: format!("failed to spawn {exec}: {e}"),
    })?;

    let deadline = Instant::now() + Duration::from_secs(spec.timeout_secs);
    let status = loop {
        match child.try_wait().map_err(crate::formats::FormatError::Io)? {
            Some(status) => break status,
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(PipelineError::Timeout {
                    id: id.into(),
                    seconds: spec.timeout_secs,
                });
            }
            None => std::thread::sleep(Duration::from_millis(20)),
        }
    };
    if !status.success() {
        return Err(PipelineError::AdapterFailed {
            id: id.into(),
            status: status.to_string(),
            stderr_tail: log_tail(log_path),
        });
    }
    Ok(())
}

/// Last few hundred bytes of an adapter log, for error context.
fn log_tail(path: &Path) -> String {
    const TAIL: u64 = 400;
    let Ok(mut f) = std::fs::File::open(path) else { return String::new() };
    let len = f.metadata().map(|m| m.len()).unwrap_or(0);
    if len > TAIL {
        use std::io::Seek;
        let _ = f.seek(std::io::SeekFrom::Start(len - TAIL));
    }
    let mut buf = String::new();
    let _ = f.read_to_string(&mut buf);
    buf.trim().replace('\n', " | ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: AdapterKind) -> AdapterSpec {
        AdapterSpec {
            kind,
            builtin: None,
            exec: Some("/bin/sh".into()),
            args: vec!["-c".into(), "true {in} {ref} {out}".into()],
            timeout_secs: 5,
            workdir: None,
        }
    }

    #[test]
    fn builtin_names_parse() {
        assert_eq!(Builtin::parse("oracle-tse"), Some(Builtin::OracleTse));
        assert_eq!(
            Builtin::parse("fail-on:mix_1:oracle-asr"),
            Some(Builtin::FailOn { mixture_id: "mix_1".into(), inner: Box::new(Builtin::OracleAsr) })
        );
        assert_eq!(Builtin::parse("no-such"), None);
        assert_eq!(Builtin::parse("fail-on:mix_1:no-such"), None);
    }

    #[test]
    fn validation_rejects_missing_placeholders() {
        let mut s = spec(AdapterKind::Tse);
        s.args = vec!["{in}".into(), "{out}".into()];
        let err = s.validate("x").unwrap_err();
        assert!(err.to_string().contains("{ref}"), "{err}");

        let mut both = spec(AdapterKind::Asr);
        both.builtin = Some("oracle-asr".into());
        assert!(both.validate("x").is_err());

        let mut neither = spec(AdapterKind::Asr);
        neither.exec = None;
        assert!(neither.validate("x").is_err());

        let mut unknown = spec(AdapterKind::Asr);
        unknown.exec = None;
        unknown.builtin = Some("bogus".into());
        assert!(unknown.validate("x").unwrap_err().to_string().contains("unknown builtin"));
    }

    #[test]
    fn adapter_set_lookup_checks_kind() {
        let mut set = AdapterSet::default();
        set.0.insert("a".into(), spec(AdapterKind::Asr));
        assert!(set.get("a", AdapterKind::Asr).is_ok());
        let err = set.get("a", AdapterKind::Tse).unwrap_err();
        assert!(err.to_string().contains("expected tse"), "{err}");
        assert!(set.get("missing", AdapterKind::Asr).is_err());
    }

    #[test]
    fn exec_runs_substituted_commands() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "payload").unwrap();
        let output = dir.path().join("out.txt");
        let s = AdapterSpec {
            kind: AdapterKind::Anonymizer,
            builtin: None,
            exec: Some("/bin/cp".into()),
            args: vec!["{in}".into(), "{out}".into()],
            timeout_secs: 10,
            workdir: None,
        };
        let log = dir.path().join("logs/cp.log");
        run_exec("cp", &s, AdapterIo { input: &input, reference: None, output: &output }, &log)
            .unwrap();
        assert_eq!(std::fs::read_to_string(&output).unwrap(), "payload");
    }

    #[test]
    fn exec_failure_carries_log_tail() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "").unwrap();
        let s = AdapterSpec {
            kind: AdapterKind::Asr,
            builtin: None,
            exec: Some("/bin/sh".into()),
            args: vec!["-c".into(), "echo boom >&2; exit 3".into(), "{in}{out}".into()],
            timeout_secs: 10,
            workdir: None,
        };
        let log = dir.path().join("fail.log");
        let err = run_exec(
            "bad",
            &s,
            AdapterIo { input: &input, reference: None, output: &input },
            &log,
        )
        .unwrap_err();
        match err {
            PipelineError::AdapterFailed { stderr_tail, .. } => {
                assert!(stderr_tail.contains("boom"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exec_timeout_kills_the_child() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "").unwrap();
        let s = AdapterSpec {
            kind: AdapterKind::Asr,
            builtin: None,
            exec: Some("/bin/sh".into()),
            args: vec!["-c".into(), "sleep 30".into(), "{in}{out}".into()],
            timeout_secs: 1,
            workdir: None,
        };
        let started = std::time::Instant::now();
        let err = run_exec(
            "slow",
            &s,
            AdapterIo { input: &input, reference: None, output: &input },
            &dir.path().join("slow.log"),
        )
        .unwrap_err();
        assert!(matches!(err, PipelineError::Timeout { seconds: 1, .. }));
        assert!(started.elapsed() < Duration::from_secs(10));
    }
}
