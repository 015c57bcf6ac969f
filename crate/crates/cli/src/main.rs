//! Command-line front end: dataset synthesis, protocol generation, metric
//! evaluation, pipeline and attack runs, and report rendering.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use tsakit::model::{SpeakerActivity, Transcript, Waveform};
use tsakit::pipeline::{
    attack_label, condition_tag, run_attack, run_dataset, AttackSummary, RunConfig, RunInputs,
    RunSummary,
};
use tsakit::report::Report;
use tsakit::wer::{Collar, Normalization, PseudoTimestamping, TcpParams, WerStats};
use tsakit::{asv, der, formats, mixgen, protocol, signal, wer};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] anyhow::Error),
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

#[derive(Parser)]
#[command(name = "tsakit", version, about = "Target-speaker anonymization evaluation toolkit")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize two-speaker overlapped mixtures from a source catalog.
    Mix(MixArgs),
    /// Write enrollment, extraction references, and per-condition trial lists.
    Trials(TrialsArgs),
    /// Word error rate between two segment-list files.
    EvalWer(SeglstPair),
    /// Concatenated-stream WER minimized over the speaker assignment.
    EvalCpwer(SeglstPair),
    /// Time-constrained cpWER with a collar on reference word intervals.
    EvalTcpwer(TcpArgs),
    /// Diarization error rate between two RTTM files.
    EvalDer(DerArgs),
    /// Equal error rate of a score file against a trial list.
    EvalEer(EerArgs),
    /// Scale-invariant SDR of an estimate WAV against a reference WAV.
    EvalSisdr(SisdrArgs),
    /// Run the extract-anonymize-recombine pipeline over a dataset.
    RunPipeline(RunArgs),
    /// Re-extract from recombined audio and score one attack scenario.
    RunAttack(AttackArgs),
    /// Render the per-condition metric table from a finished bundle.
    Report(ReportArgs),
}

#[derive(Args)]
struct MixArgs {
    /// Source catalog JSON.
    #[arg(long)]
    catalog: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Overlap conditions as fractions in (0, 1], comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.4, 0.6, 0.8, 1.0])]
    conditions: Vec<f64>,
    /// Mixtures per condition.
    #[arg(long, default_value_t = 500)]
    per_condition: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform per-source gain jitter in +-dB; 0 keeps unit gains.
    #[arg(long, default_value_t = 0.0)]
    gain_jitter_db: f64,
}

#[derive(Args)]
struct TrialsArgs {
    /// Catalog the enrollment and reference utterances are drawn from.
    #[arg(long)]
    catalog: PathBuf,
    /// Dataset directory holding manifest.json.
    #[arg(long)]
    dataset: PathBuf,
    /// Output protocol directory.
    #[arg(long)]
    out: PathBuf,
    /// Enrollment utterances per speaker.
    #[arg(long, default_value_t = protocol::DEFAULT_ENROLLMENT_PER_SPEAKER)]
    per_speaker: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SeglstPair {
    /// Reference segment-list file.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Hypothesis segment-list file.
    #[arg(long = "hyp")]
    hypothesis: PathBuf,
    /// Compare tokens exactly instead of lowercasing and stripping punctuation.
    #[arg(long)]
    exact_tokens: bool,
}

#[derive(Args)]
struct TcpArgs {
    #[command(flatten)]
    pair: SeglstPair,
    /// Collar in seconds; `inf` admits every pairing.
    #[arg(long, default_value_t = wer::DEFAULT_COLLAR)]
    collar: f64,
}

#[derive(Args)]
struct DerArgs {
    /// Reference RTTM file.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Hypothesis RTTM file.
    #[arg(long = "hyp")]
    hypothesis: PathBuf,
    /// Collar in seconds excluded around reference boundaries.
    #[arg(long, default_value_t = der::DEFAULT_COLLAR)]
    collar: f64,
}

#[derive(Args)]
struct EerArgs {
    /// Trial list file.
    #[arg(long)]
    trials: PathBuf,
    /// Score file joined against the trial list.
    #[arg(long)]
    scores: PathBuf,
}

#[derive(Args)]
struct SisdrArgs {
    /// Estimate WAV.
    #[arg(long)]
    estimate: PathBuf,
    /// Reference WAV.
    #[arg(long)]
    reference: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration JSON with adapter specs and role bindings.
    #[arg(long)]
    config: PathBuf,
    /// Dataset directory produced by `mix`.
    #[arg(long)]
    dataset: PathBuf,
    /// Protocol directory produced by `trials`.
    #[arg(long)]
    protocol: PathBuf,
    /// Catalog the protocol references resolve against.
    #[arg(long)]
    catalog: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AttackerArg {
    Ignorant,
    SemiInformed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReferenceArg {
    Original,
    Anonymized,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Attack scenario.
    #[arg(long, value_enum)]
    attacker: AttackerArg,
    /// Reference audio the attacker's extractor is conditioned on;
    /// defaults to original for ignorant and anonymized for semi-informed.
    #[arg(long, value_enum)]
    reference_kind: Option<ReferenceArg>,
    /// Attacker's extraction adapter id; defaults to the pipeline TSE role.
    #[arg(long)]
    tse: Option<String>,
    /// Attacker's embedding adapter id; defaults to the pipeline embedder role.
    #[arg(long)]
    embedder: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Bundle directory holding metrics/*.json.
    #[arg(long)]
    bundle: PathBuf,
    /// Also write the table as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() {
    env_logger::init();
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            1
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let json = cli.json;
    match cli.command {
        Command::Mix(args) => cmd_mix(args, json),
        Command::Trials(args) => cmd_trials(args, json),
        Command::EvalWer(args) => cmd_eval_wer(args, json),
        Command::EvalCpwer(args) => cmd_eval_cpwer(args, json),
        Command::EvalTcpwer(args) => cmd_eval_tcpwer(args, json),
        Command::EvalDer(args) => cmd_eval_der(args, json),
        Command::EvalEer(args) => cmd_eval_eer(args, json),
        Command::EvalSisdr(args) => cmd_eval_sisdr(args, json),
        Command::RunPipeline(args) => cmd_run_pipeline(args, json),
        Command::RunAttack(args) => cmd_run_attack(args, json),
        Command::Report(args) => cmd_report(args, json),
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("value serializes"));
}

fn cmd_mix(args: MixArgs, json: bool) -> Result<()> {
    for &c in &args.conditions {
        if c.is_nan() || c <= 0.0 || c > 1.0 {
            return Err(usage(format!("condition {c} must be a fraction in (0, 1]")));
        }
    }
    if args.per_condition == 0 {
        return Err(usage("--per-condition must be at least 1"));
    }
    let catalog = formats::read_catalog(&args.catalog)
        .with_context(|| format!("reading catalog {}", args.catalog.display()))?;
    let catalog_dir = args.catalog.parent().unwrap_or(Path::new("."));
    let params = mixgen::BuildParams {
        conditions: args.conditions.clone(),
        mixtures_per_condition: args.per_condition,
        seed: args.seed,
        gain_jitter_db: args.gain_jitter_db,
    };
    let built = mixgen::build_dataset(&catalog, catalog_dir, &params, &args.out)
        .context("synthesizing mixtures")?;
    let tags: Vec<String> = args.conditions.iter().map(|&c| condition_tag(c)).collect();
    if json {
        print_json(&serde_json::json!({
            "mixtures": built.manifest.mixtures.len(),
            "sample_rate": built.manifest.sample_rate,
            "conditions": tags,
            "manifest": built.manifest_path,
        }));
    } else {
        println!(
            "wrote {} mixtures over {} conditions to {}",
            built.manifest.mixtures.len(),
            tags.len(),
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_trials(args: TrialsArgs, json: bool) -> Result<()> {
    let catalog = formats::read_catalog(&args.catalog)
        .with_context(|| format!("reading catalog {}", args.catalog.display()))?;
    let manifest_path = args.dataset.join("manifest.json");
    let manifest = formats::read_manifest(&manifest_path)
        .with_context(|| format!("reading manifest {}", manifest_path.display()))?;

    let used = protocol::mixture_utterances(&manifest.mixtures);
    let enrollment = protocol::generate_enrollment(&catalog, args.per_speaker, &used, args.seed)
        .context("selecting enrollment utterances")?;
    let references = protocol::select_tse_references(&catalog, &manifest.mixtures, args.seed)
        .context("selecting extraction references")?;

    let trials_dir = args.out.join("trials");
    std::fs::create_dir_all(&trials_dir)
        .map_err(|e| anyhow::anyhow!("creating {}: {e}", trials_dir.display()))?;
    write_pretty(&args.out.join("enrollment.json"), &enrollment)?;
    write_pretty(&args.out.join("tse_references.json"), &references)?;

    let enrolled: Vec<String> = enrollment.keys().cloned().collect();
    let mut by_tag: BTreeMap<String, Vec<tsakit::model::MixtureRecord>> = BTreeMap::new();
    for record in &manifest.mixtures {
        by_tag.entry(condition_tag(record.overlap_requested)).or_default().push(record.clone());
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (tag, mixtures) in &by_tag {
        let list = protocol::generate_trials(mixtures, &enrolled, "extracted")
            .with_context(|| format!("building trials for condition {tag}"))?;
        let path = trials_dir.join(format!("ov{tag}.txt"));
        std::fs::write(&path, formats::write_trials(&list.trials))
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))?;
        counts.insert(tag.clone(), list.trials.len());
    }

    if json {
        print_json(&serde_json::json!({
            "speakers": enrollment.len(),
            "per_speaker": args.per_speaker,
            "references": references.len(),
            "trials": counts,
        }));
    } else {
        println!(
            "enrolled {} speakers x {}; {} extraction references",
            enrollment.len(),
            args.per_speaker,
            references.len()
        );
        for (tag, n) in &counts {
            println!("ov{tag}: {n} trials");
        }
    }
    Ok(())
}

fn write_pretty<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| anyhow::anyhow!("serializing {}: {e}", path.display()))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))?;
    Ok(())
}

fn load_seglst(path: &Path) -> Result<Vec<Transcript>> {
    let file = std::fs::File::open(path)
        .map_err(|e| anyhow::anyhow!("opening {}: {e}", path.display()))?;
    let parsed = formats::parse_seglst(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(parsed)
}

fn load_rttm(path: &Path) -> Result<Vec<SpeakerActivity>> {
    let file = std::fs::File::open(path)
        .map_err(|e| anyhow::anyhow!("opening {}: {e}", path.display()))?;
    let parsed = formats::parse_rttm(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(parsed)
}

/// Pair items by session id; a session present on only one side is scored
/// against an empty counterpart rather than dropped.
fn pair_sessions<T: Clone>(
    reference: Vec<T>,
    hypothesis: Vec<T>,
    session_of: impl Fn(&T) -> String,
    empty: impl Fn(&str) -> T,
) -> Vec<(T, T)> {
    let mut hyp_by_id: BTreeMap<String, T> = hypothesis
        .into_iter()
        .map(|t| (session_of(&t), t))
        .collect();
    let mut pairs: Vec<(T, T)> = Vec::new();
    for r in reference {
        let id = session_of(&r);
        let h = hyp_by_id.remove(&id).unwrap_or_else(|| empty(&id));
        pairs.push((r, h));
    }
    for (id, h) in hyp_by_id {
        pairs.push((empty(&id), h));
    }
    pairs
}

fn norm_of(exact: bool) -> Normalization {
    if exact {
        Normalization::Off
    } else {
        Normalization::LowercaseStripPunct
    }
}

/// Words of a transcript in start order, all speakers pooled.
fn session_tokens(t: &Transcript) -> Vec<String> {
    let mut segments: Vec<_> = t.segments.iter().collect();
    segments.sort_by(|a, b| a.start.partial_cmp(&b.start).expect("segment times are numbers"));
    segments.iter().flat_map(|s| s.words.iter().map(|w| w.text.clone())).collect()
}

fn print_wer(label: &str, stats: &WerStats, json: bool) {
    if json {
        print_json(&serde_json::json!({
            "metric": label,
            "rate_percent": stats.rate() * 100.0,
            "errors": stats.errors(),
            "substitutions": stats.substitutions,
            "insertions": stats.insertions,
            "deletions": stats.deletions,
            "ref_length": stats.ref_length,
        }));
    } else {
        println!("{:.1}%", stats.rate() * 100.0);
    }
}

fn seglst_pairs(pair: &SeglstPair) -> Result<Vec<(Transcript, Transcript)>> {
    let reference = load_seglst(&pair.reference)?;
    let hypothesis = load_seglst(&pair.hypothesis)?;
    Ok(pair_sessions(
        reference,
        hypothesis,
        |t| t.session_id.clone(),
        |id| Transcript::new(id),
    ))
}

fn cmd_eval_wer(args: SeglstPair, json: bool) -> Result<()> {
    let norm = norm_of(args.exact_tokens);
    let mut total = WerStats::default();
    for (r, h) in seglst_pairs(&args)? {
        let ref_words = session_tokens(&r);
        let hyp_words = session_tokens(&h);
        total.accumulate(&wer::word_error_rate(&ref_words, &hyp_words, norm));
    }
    print_wer("wer", &total, json);
    Ok(())
}

fn cmd_eval_cpwer(args: SeglstPair, json: bool) -> Result<()> {
    let norm = norm_of(args.exact_tokens);
    let mut total = WerStats::default();
    for (r, h) in seglst_pairs(&args)? {
        total.accumulate(&wer::cp_wer(&r, &h, norm).stats);
    }
    print_wer("cpwer", &total, json);
    Ok(())
}

fn collar_arg(collar: f64) -> Result<Collar> {
    if collar.is_nan() || collar <= 0.0 {
        return Err(usage(format!("collar must be > 0 seconds, got {collar}")));
    }
    if collar.is_infinite() {
        Ok(Collar::Unbounded)
    } else {
        Ok(Collar::Seconds(collar))
    }
}

fn cmd_eval_tcpwer(args: TcpArgs, json: bool) -> Result<()> {
    let params =
        TcpParams { collar: collar_arg(args.collar)?, pseudo: PseudoTimestamping::EqualDivision };
    let norm = norm_of(args.pair.exact_tokens);
    let mut total = WerStats::default();
    for (r, h) in seglst_pairs(&args.pair)? {
        total.accumulate(&wer::tcp_wer(&r, &h, &params, norm).stats);
    }
    print_wer("tcpwer", &total, json);
    Ok(())
}

fn cmd_eval_der(args: DerArgs, json: bool) -> Result<()> {
    if args.collar.is_nan() || args.collar < 0.0 {
        return Err(usage(format!("collar must be >= 0 seconds, got {}", args.collar)));
    }
    let reference = load_rttm(&args.reference)?;
    let hypothesis = load_rttm(&args.hypothesis)?;
    let pairs = pair_sessions(
        reference,
        hypothesis,
        |a| a.session_id.clone(),
        |id| SpeakerActivity::new(id),
    );
    let mut total = der::DerResult::default();
    for (r, h) in &pairs {
        let scored = der::der(r, h, args.collar)
            .with_context(|| format!("scoring session {}", r.session_id))?;
        total.accumulate(&scored);
    }
    if json {
        print_json(&serde_json::json!({
            "metric": "der",
            "der_percent": total.der() * 100.0,
            "missed": total.missed,
            "false_alarm": total.false_alarm,
            "confusion": total.confusion,
            "total_ref": total.total_ref,
            "sessions": pairs.len(),
        }));
    } else {
        println!("{:.1}%", total.der() * 100.0);
    }
    Ok(())
}

fn cmd_eval_eer(args: EerArgs, json: bool) -> Result<()> {
    let trials_file = std::fs::File::open(&args.trials)
        .map_err(|e| anyhow::anyhow!("opening {}: {e}", args.trials.display()))?;
    let trials = formats::parse_trials(BufReader::new(trials_file))
        .with_context(|| format!("parsing {}", args.trials.display()))?;
    let scores_file = std::fs::File::open(&args.scores)
        .map_err(|e| anyhow::anyhow!("opening {}: {e}", args.scores.display()))?;
    let scored = formats::parse_scores(BufReader::new(scores_file), &trials)
        .with_context(|| format!("joining {}", args.scores.display()))?;
    let result = asv::eer(&scored).context("computing the equal error rate")?;
    if json {
        print_json(&serde_json::json!({
            "metric": "eer",
            "eer_percent": result.eer * 100.0,
            "threshold": result.threshold,
            "trials": scored.len(),
        }));
    } else {
        println!("{:.1}%", result.eer * 100.0);
    }
    Ok(())
}

fn load_wav(path: &Path) -> Result<Waveform> {
    formats::read_wav(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::from)
}

fn cmd_eval_sisdr(args: SisdrArgs, json: bool) -> Result<()> {
    let estimate = load_wav(&args.estimate)?;
    let reference = load_wav(&args.reference)?;
    let result = signal::si_sdr(&estimate, &reference).context("computing SI-SDR")?;
    let exact = result.value_db.is_infinite();
    if json {
        print_json(&serde_json::json!({
            "metric": "si_sdr",
            "value_db": if exact { None } else { Some(result.value_db) },
            "note": if exact { Some("exact reconstruction") } else { None },
            "scaling": result.scaling,
        }));
    } else if exact {
        println!("inf dB");
    } else {
        println!("{:.1} dB", result.value_db);
    }
    Ok(())
}

fn run_inputs(args: &RunArgs) -> RunInputs<'_> {
    RunInputs {
        dataset_dir: &args.dataset,
        protocol_dir: &args.protocol,
        catalog_path: &args.catalog,
        bundle_dir: &args.bundle,
    }
}

fn summary_json(summary: &RunSummary) -> serde_json::Value {
    serde_json::json!({
        "mixtures": summary.mixtures,
        "completed": summary.completed,
        "failures": summary.failures,
        "metrics": summary.metrics,
    })
}

fn cmd_run_pipeline(args: RunArgs, json: bool) -> Result<()> {
    let cfg = RunConfig::load(&args.config)
        .with_context(|| format!("loading config {}", args.config.display()))?;
    let summary = run_dataset(&cfg, &run_inputs(&args)).context("running the pipeline")?;
    if json {
        print_json(&summary_json(&summary));
    } else {
        println!("completed {}/{} mixtures", summary.completed, summary.mixtures);
        for f in &summary.failures {
            println!("failed {} at {}: {}", f.mixture_id, f.stage, f.message);
        }
        println!("metrics in {}", args.bundle.join("metrics").display());
    }
    Ok(())
}

fn attack_json(summary: &AttackSummary) -> serde_json::Value {
    serde_json::json!({
        "label": summary.label,
        "mixtures": summary.mixtures,
        "scored_mixtures": summary.scored_mixtures,
        "failures": summary.failures,
        "eer_percent": summary.eer,
        "metrics": summary.metrics_path,
    })
}

fn cmd_run_attack(args: AttackArgs, json: bool) -> Result<()> {
    let cfg = RunConfig::load(&args.run.config)
        .with_context(|| format!("loading config {}", args.run.config.display()))?;
    let attacker_kind = match args.attacker {
        AttackerArg::Ignorant => protocol::AttackerKind::Ignorant,
        AttackerArg::SemiInformed => protocol::AttackerKind::SemiInformed,
    };
    let reference_kind = match (args.reference_kind, attacker_kind) {
        (Some(ReferenceArg::Original), _) => protocol::ReferenceKind::Original,
        (Some(ReferenceArg::Anonymized), _) => protocol::ReferenceKind::Anonymized,
        (None, protocol::AttackerKind::Ignorant) => protocol::ReferenceKind::Original,
        (None, protocol::AttackerKind::SemiInformed) => protocol::ReferenceKind::Anonymized,
    };
    let config = protocol::AttackConfig {
        attacker_kind,
        reference_kind,
        tse_adapter: args.tse.unwrap_or_else(|| cfg.roles.tse.clone()),
        asv_adapter: args.embedder.unwrap_or_else(|| cfg.roles.embedder.clone()),
    };
    let label = attack_label(&config);
    let summary =
        run_attack(&cfg, &config, &run_inputs(&args.run)).context("running the attack")?;
    if json {
        print_json(&attack_json(&summary));
    } else {
        println!("{label}: scored {}/{} mixtures", summary.scored_mixtures, summary.mixtures);
        for (tag, eer) in &summary.eer {
            match eer {
                Some(v) => println!("ov{tag}: eer {v:.1}%"),
                None => println!("ov{tag}: no score"),
            }
        }
        for f in &summary.failures {
            println!("failed {} at {}: {}", f.mixture_id, f.stage, f.message);
        }
    }
    Ok(())
}

fn cmd_report(args: ReportArgs, json: bool) -> Result<()> {
    let report = Report::from_bundle(&args.bundle)
        .with_context(|| format!("loading metrics from {}", args.bundle.display()))?;
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, report.render_csv())
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", csv_path.display()))?;
    }
    if json {
        let value = serde_json::to_value(&report)
            .map_err(|e| anyhow::anyhow!("serializing report: {e}"))?;
        print_json(&value);
    } else {
        print!("{}", report.render_text());
    }
    Ok(())
}
