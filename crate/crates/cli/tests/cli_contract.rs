//! Command-line contract: exit codes, flag handling, output shapes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tsakit::formats;
use tsakit::model::{
    ActivityEntry, ScoredTrial, Segment, SpeakerActivity, Transcript, Trial, Waveform,
};
use tsakit::pipeline::MetricFile;
use tsakit::report::Report;

fn tsakit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsakit")).args(args).output().expect("spawn tsakit")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_transcript(path: &Path) {
    let mut t = Transcript::new("meet1");
    t.segments.push(Segment::with_text("meet1", "alice", 0.0, 2.0, "good morning all"));
    t.segments.push(Segment::with_text("meet1", "bob", 1.5, 3.0, "morning to you"));
    fs::write(path, formats::write_seglst(&[t])).unwrap();
}

fn write_activity(path: &Path) {
    let mut a = SpeakerActivity::new("meet1");
    a.entries.push(ActivityEntry::new("alice", 0.0, 2.0));
    a.entries.push(ActivityEntry::new("bob", 1.5, 1.5));
    fs::write(path, formats::write_rttm(&[a])).unwrap();
}

/// Trials plus perfectly separated scores: every target above every
/// nontarget.
fn write_separable_scores(dir: &Path) -> (PathBuf, PathBuf) {
    let trials = vec![
        Trial::target("spk0", "mix_1"),
        Trial::target("spk1", "mix_2"),
        Trial::nontarget("spk1", "mix_1"),
        Trial::nontarget("spk0", "mix_2"),
    ];
    let scored: Vec<ScoredTrial> = trials
        .iter()
        .map(|t| ScoredTrial { trial: t.clone(), score: if t.is_target() { 0.9 } else { 0.1 } })
        .collect();
    let t_path = dir.join("trials.txt");
    let s_path = dir.join("scores.txt");
    fs::write(&t_path, formats::write_trials(&trials)).unwrap();
    fs::write(&s_path, formats::write_scores(&scored)).unwrap();
    (t_path, s_path)
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = tsakit(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("Usage"), "no usage text: {}", stderr_of(&out));
}

#[test]
fn unknown_flags_suggest_the_nearest_option() {
    let out = tsakit(&["report", "--bundel", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("--bundle"), "no suggestion: {}", stderr_of(&out));
}

#[test]
fn help_and_version_exit_cleanly() {
    for flag in ["--help", "--version"] {
        let out = tsakit(&[flag]);
        assert_eq!(out.status.code(), Some(0), "{flag}");
    }
    let out = tsakit(&["eval-tcpwer", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("--collar"));
}

#[test]
fn identical_transcripts_score_zero_tcp_wer() {
    let tmp = tempfile::tempdir().unwrap();
    let r = tmp.path().join("r.seglst");
    write_transcript(&r);
    let out = tsakit(&[
        "eval-tcpwer",
        "--ref",
        r.to_str().unwrap(),
        "--hyp",
        r.to_str().unwrap(),
        "--collar",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "0.0%\n");
}

#[test]
fn nonpositive_or_nan_collars_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let r = tmp.path().join("r.seglst");
    write_transcript(&r);
    let path = r.to_str().unwrap();
    for bad in ["0", "-1", "NaN"] {
        let out = tsakit(&["eval-tcpwer", "--ref", path, "--hyp", path, "--collar", bad]);
        assert_eq!(out.status.code(), Some(1), "collar {bad}");
    }
    // an infinite collar is the unconstrained mode, not an error
    let out = tsakit(&["eval-tcpwer", "--ref", path, "--hyp", path, "--collar", "inf"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "0.0%\n");
}

#[test]
fn token_normalization_is_on_by_default_and_defeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let r = tmp.path().join("r.seglst");
    let h = tmp.path().join("h.seglst");
    let mut t = Transcript::new("m");
    t.segments.push(Segment::with_text("m", "a", 0.0, 1.0, "Hello, there."));
    fs::write(&r, formats::write_seglst(&[t])).unwrap();
    let mut t = Transcript::new("m");
    t.segments.push(Segment::with_text("m", "a", 0.0, 1.0, "hello there"));
    fs::write(&h, formats::write_seglst(&[t])).unwrap();

    let out = tsakit(&["eval-wer", "--ref", r.to_str().unwrap(), "--hyp", h.to_str().unwrap()]);
    assert_eq!(stdout_of(&out), "0.0%\n");
    let out = tsakit(&[
        "eval-wer",
        "--ref",
        r.to_str().unwrap(),
        "--hyp",
        h.to_str().unwrap(),
        "--exact-tokens",
    ]);
    assert_eq!(stdout_of(&out), "100.0%\n");
}

#[test]
fn separable_scores_hit_zero_eer() {
    let tmp = tempfile::tempdir().unwrap();
    let (trials, scores) = write_separable_scores(tmp.path());
    let out = tsakit(&[
        "eval-eer",
        "--trials",
        trials.to_str().unwrap(),
        "--scores",
        scores.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "0.0%\n");
}

#[test]
fn identical_rttm_scores_zero_der() {
    let tmp = tempfile::tempdir().unwrap();
    let r = tmp.path().join("r.rttm");
    write_activity(&r);
    let out =
        tsakit(&["eval-der", "--ref", r.to_str().unwrap(), "--hyp", r.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "0.0%\n");
}

#[test]
fn identical_wavs_print_the_infinite_sentinel() {
    let tmp = tempfile::tempdir().unwrap();
    let wav = tmp.path().join("a.wav");
    let samples = (0..1600).map(|i| 0.2 * (i as f64 * 0.05).sin()).collect();
    formats::write_wav(&wav, &Waveform::new(samples, 16_000)).unwrap();
    let out = tsakit(&[
        "eval-sisdr",
        "--estimate",
        wav.to_str().unwrap(),
        "--reference",
        wav.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "inf dB\n");

    let json = tsakit(&[
        "--json",
        "eval-sisdr",
        "--estimate",
        wav.to_str().unwrap(),
        "--reference",
        wav.to_str().unwrap(),
    ]);
    let value: serde_json::Value = serde_json::from_str(&stdout_of(&json)).unwrap();
    assert!(value["value_db"].is_null());
    assert_eq!(value["note"], "exact reconstruction");
}

#[test]
fn missing_inputs_are_data_errors() {
    let out = tsakit(&["eval-wer", "--ref", "/no/such.seglst", "--hyp", "/no/such.seglst"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tsakit(&["report", "--bundle", "/no/such/bundle"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tsakit(&[
        "run-pipeline",
        "--config",
        "/no/such.json",
        "--dataset",
        "d",
        "--protocol",
        "p",
        "--catalog",
        "c",
        "--bundle",
        "b",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_run_configs_are_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, "{\"adapters\": {}}").unwrap();
    let out = tsakit(&[
        "run-pipeline",
        "--config",
        cfg.to_str().unwrap(),
        "--dataset",
        "d",
        "--protocol",
        "p",
        "--catalog",
        "c",
        "--bundle",
        "b",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!stderr_of(&out).is_empty());
}

#[test]
fn json_flag_emits_machine_readable_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let r = tmp.path().join("r.seglst");
    write_transcript(&r);
    let out = tsakit(&[
        "--json",
        "eval-tcpwer",
        "--ref",
        r.to_str().unwrap(),
        "--hyp",
        r.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(value["metric"], "tcpwer");
    assert_eq!(value["rate_percent"], 0.0);
    assert_eq!(value["ref_length"], 6);
}

#[test]
fn report_json_round_trips_and_gaps_warn() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = tmp.path().join("bundle");
    fs::create_dir_all(bundle.join("metrics")).unwrap();
    let mut full = MetricFile::new("recombined", "tcpwer", "percent");
    for (tag, v) in [("020", 17.8), ("040", 17.3), ("060", 16.7)] {
        full.values.insert(tag.into(), Some(v));
    }
    full.write(bundle.join("metrics/recombined_tcpwer.json")).unwrap();
    let mut gappy = MetricFile::new("recombined", "der", "percent");
    gappy.values.insert("020".into(), Some(41.2));
    gappy.write(bundle.join("metrics/recombined_der.json")).unwrap();

    let out = tsakit(&["--json", "report", "--bundle", bundle.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "gaps must warn, not fail");
    let value: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let parsed: Report = serde_json::from_value(value.clone()).unwrap();
    assert_eq!(serde_json::to_value(&parsed).unwrap(), value, "report does not round-trip");
    assert!(!parsed.warnings.is_empty(), "missing conditions must be warned about");
    let der_row = parsed.rows.iter().find(|r| r.metric == "der").unwrap();
    assert_eq!(der_row.values.iter().filter(|(_, v)| v.is_none()).count(), 2);
    assert_eq!(der_row.average, Some(41.2), "average must skip gaps");

    // the text table renders gaps rather than erroring
    let text = stdout_of(&tsakit(&["report", "--bundle", bundle.to_str().unwrap()]));
    assert!(text.contains('-'), "no gap marker in:\n{text}");
    assert!(text.contains('*'), "no primary-metric marker in:\n{text}");
}

#[test]
fn report_writes_csv_when_asked() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = tmp.path().join("bundle");
    fs::create_dir_all(bundle.join("metrics")).unwrap();
    let mut m = MetricFile::new("extracted", "eer", "percent");
    m.values.insert("020".into(), Some(4.8));
    m.write(bundle.join("metrics/extracted_eer.json")).unwrap();
    let csv = tmp.path().join("table.csv");
    let out = tsakit(&[
        "report",
        "--bundle",
        bundle.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let written = fs::read_to_string(&csv).unwrap();
    assert!(written.lines().count() >= 2, "no rows in:\n{written}");
    assert!(written.contains("extracted"), "row missing in:\n{written}");
}
