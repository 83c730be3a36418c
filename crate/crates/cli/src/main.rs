use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use asr_inconsistency::baselines::{BaselineConfig, SpeechRateUnit, WadaMode};
use asr_inconsistency::ctc::{beam_search_decode, greedy_transcript, DecoderConfig};
use asr_inconsistency::harness::{
    self, collect_failures, llm_accuracy_report, render_llm_accuracy, replay, run_pipeline, score_manifest, Assets,
    PipelineConfig,
};
use asr_inconsistency::io::{load_manifest, load_posteriors, load_vocabulary, Manifest, Vocabulary};
use asr_inconsistency::metrics::{Method, MethodKind};
use asr_inconsistency::ngram::{load_arpa, NGramModel};
use asr_inconsistency::reference::{
    Corrector, HttpCorrector, Language, MockCorrector, RetryPolicy, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};
use asr_inconsistency::synth::{self, SynthConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Reference-free intelligibility scoring from CTC posteriors.
#[derive(Debug, Parser)]
#[command(name = "asr-inconsistency", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print greedy (and optionally beam-search) transcriptions.
    Decode(DecodeArgs),
    /// Per-utterance scores as CSV, one column per method and run.
    Score(ScoreArgs),
    /// Full evaluation: scores, speaker aggregation, correlations and a run directory.
    Eval(EvalArgs),
    /// Speech-rate and WADA-SNR scores only.
    Baselines(BaselineArgs),
    /// Rebuild a report from a run directory's persisted scores.
    Report(ReportArgs),
    /// Write the synthetic evaluation corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct DecoderArgs {
    /// ARPA language model (plain or gzip).
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Language model weight.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Word insertion bonus.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    beam_width: usize,
}

impl DecoderArgs {
    fn config(&self) -> DecoderConfig {
        DecoderConfig {
            alpha: self.alpha,
            beta: self.beta,
            beam_width: self.beam_width,
            ..DecoderConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Symbol inventory, one per line.
    #[arg(long)]
    vocab: PathBuf,
    /// Posterior files (.ctcp or text); ids are file stems.
    #[arg(long, num_args = 1.., conflicts_with = "manifest", required_unless_present = "manifest")]
    posteriors: Vec<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Emit W_greedy (default when --beam is absent).
    #[arg(long)]
    greedy: bool,
    /// Emit the LM-fused beam-search transcription; requires --lm.
    #[arg(long)]
    beam: bool,
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LlmArgs {
    /// Model name; repeat for several models. Falls back to LLM_MODEL_NAME.
    #[arg(long = "llm-model")]
    llm_models: Vec<String>,
    /// Independent correction runs per model.
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Offline corrector: replies from --mock-replies, else echoes the input in brackets.
    #[arg(long)]
    mock: bool,
    /// JSON object mapping input sentences to raw replies.
    #[arg(long, requires = "mock")]
    mock_replies: Option<PathBuf>,
    /// Retries for transport and rate-limit failures.
    #[arg(long, default_value_t = 3)]
    max_retries: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RateUnit {
    Wpm,
    Wps,
}

#[derive(Debug, Args)]
struct BaselineOpts {
    #[arg(long, value_enum, default_value_t = RateUnit::Wpm)]
    speech_rate_unit: RateUnit,
    /// Framewise WADA-SNR window in seconds; whole-utterance when absent.
    #[arg(long, requires = "wada_hop")]
    wada_window: Option<f64>,
    #[arg(long, requires = "wada_window")]
    wada_hop: Option<f64>,
}

impl BaselineOpts {
    fn config(&self) -> BaselineConfig {
        BaselineConfig {
            speech_rate_unit: match self.speech_rate_unit {
                RateUnit::Wpm => SpeechRateUnit::WordsPerMinute,
                RateUnit::Wps => SpeechRateUnit::WordsPerSecond,
            },
            wada_mode: match (self.wada_window, self.wada_hop) {
                (Some(window_s), Some(hop_s)) => WadaMode::Framewise { window_s, hop_s },
                _ => WadaMode::Utterance,
            },
        }
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON-Lines utterance manifest.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value = "dataset")]
    dataset: String,
    /// Language named in the correction prompt.
    #[arg(long, default_value = "Dutch")]
    language: String,
    #[command(flatten)]
    decoder: DecoderArgs,
    #[command(flatten)]
    llm: LlmArgs,
    #[command(flatten)]
    baselines: BaselineOpts,
    /// Worker threads for utterance scoring.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Methods: speech_rate, wada_snr, ngram, llm, reference_wer.
    #[arg(long = "method", alias = "methods", value_delimiter = ',', required = true)]
    methods: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated methods; defaults to every method whose inputs are available.
    #[arg(long, alias = "method", value_delimiter = ',')]
    methods: Vec<String>,
    /// Run directory to create or overwrite.
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "speech_rate,wada_snr")]
    methods: Vec<String>,
    #[command(flatten)]
    baselines: BaselineOpts,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    run_dir: PathBuf,
    /// Exit 1 if the rebuilt report differs from the stored one.
    #[arg(long)]
    check: bool,
    /// Print the W_LLM accuracy table instead.
    #[arg(long)]
    llm_accuracy: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    output_dir: PathBuf,
    /// Ten-utterance variant instead of the twelve-speaker corpus.
    #[arg(long)]
    small: bool,
    #[arg(long)]
    seed: Option<u64>,
}

/// Usage problems exit with 2, everything else with 1.
enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("error")),
        )
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Decode(a) => cmd_decode(a),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Baselines(a) => cmd_baselines(a),
        Command::Report(a) => cmd_report(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run with --help for usage");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("writing to stdout")?,
    }
    Ok(())
}

fn load_vocab(path: &Path) -> CliResult<Vocabulary> {
    load_vocabulary(path).map_err(|e| usage(format!("vocabulary {}: {e}", path.display())))
}

fn load_lm(path: &Path) -> CliResult<NGramModel> {
    load_arpa(path).map_err(|e| usage(format!("language model {}: {e}", path.display())))
}

fn load_manifest_checked(path: &Path) -> CliResult<Manifest> {
    load_manifest(path).map_err(|e| usage(format!("manifest {}: {e}", path.display())))
}

fn parse_methods(names: &[String]) -> CliResult<Vec<MethodKind>> {
    let set: BTreeSet<MethodKind> = names
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<MethodKind>().map_err(|e| usage(e.to_string())))
        .collect::<Result<_, _>>()?;
    if set.is_empty() {
        return Err(usage("no methods selected"));
    }
    Ok(set.into_iter().collect())
}

fn decoder_config(args: &DecoderArgs) -> CliResult<DecoderConfig> {
    let cfg = args.config();
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn cmd_decode(args: DecodeArgs) -> CliResult<ExitCode> {
    if args.beam && args.decoder.lm.is_none() {
        return Err(usage("--beam requires --lm"));
    }
    let vocab = load_vocab(&args.vocab)?;
    let lm = args.decoder.lm.as_deref().map(load_lm).transpose()?;
    let cfg = decoder_config(&args.decoder)?;
    let show_greedy = args.greedy || !args.beam;

    let paths: Vec<(String, PathBuf)> = match &args.manifest {
        Some(m) => {
            let manifest = load_manifest_checked(m)?;
            manifest
                .records
                .iter()
                .map(|r| (r.utterance_id.clone(), manifest.resolve(&r.posterior_path)))
                .collect()
        }
        None => args
            .posteriors
            .iter()
            .map(|p| {
                let id = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                (id, p.clone())
            })
            .collect(),
    };

    let mut out = String::new();
    for (id, path) in paths {
        let post = load_posteriors(&path, &vocab).with_context(|| format!("posteriors for {id}"))?;
        if show_greedy {
            let t = greedy_transcript(&post, &vocab).with_context(|| format!("decoding {id}"))?;
            out.push_str(&format!("{id}\tgreedy\t{}\n", t.raw_text()));
        }
        if let Some(lm) = &lm {
            if args.beam {
                let t = beam_search_decode(&post, &vocab, lm, &cfg).with_context(|| format!("decoding {id}"))?;
                out.push_str(&format!("{id}\tngram_reference\t{}\n", t.raw_text()));
            }
        }
    }
    emit(args.output.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

/// Everything `score` and `eval` need, validated before any decoding starts.
struct Prepared {
    manifest: Manifest,
    config: PipelineConfig,
    vocab: Option<Vocabulary>,
    lm: Option<NGramModel>,
    corrector: Option<Box<dyn Corrector>>,
}

impl Prepared {
    fn assets(&self) -> Assets<'_> {
        Assets {
            vocab: self.vocab.as_ref(),
            lm: self.lm.as_ref(),
            corrector: self.corrector.as_deref(),
        }
    }
}

fn prepare(common: &CommonArgs, methods: Vec<MethodKind>) -> CliResult<Prepared> {
    let manifest = load_manifest_checked(&common.manifest)?;
    let wants = |k: MethodKind| methods.contains(&k);
    let needs_vocab = wants(MethodKind::Ngram) || wants(MethodKind::Llm) || wants(MethodKind::ReferenceWer);

    let vocab = match (&common.vocab, needs_vocab) {
        (Some(p), true) => Some(load_vocab(p)?),
        (None, true) => return Err(usage("selected methods need --vocab")),
        _ => None,
    };
    let lm = match (&common.decoder.lm, wants(MethodKind::Ngram)) {
        (Some(p), true) => Some(load_lm(p)?),
        (None, true) => return Err(usage("method ngram needs --lm")),
        _ => None,
    };
    let decoder = decoder_config(&common.decoder)?;

    let llm = &common.llm;
    let mut llm_models = llm.llm_models.clone();
    let corrector: Option<Box<dyn Corrector>> = if wants(MethodKind::Llm) {
        if llm.runs == 0 {
            return Err(usage("--runs must be at least 1"));
        }
        if llm.temperature.is_nan() || llm.temperature < 0.0 {
            return Err(usage("--temperature must be non-negative"));
        }
        if llm_models.is_empty() {
            match std::env::var(ENV_MODEL) {
                Ok(m) if !m.trim().is_empty() => llm_models.push(m),
                _ if llm.mock => llm_models.push("mock".into()),
                _ => return Err(usage(format!("method llm needs --llm-model or {ENV_MODEL}"))),
            }
        }
        if llm.mock {
            let mock = match &llm.mock_replies {
                Some(p) => MockCorrector::from_json_file(p).map_err(|e| usage(e.to_string()))?,
                None => MockCorrector::new(),
            };
            Some(Box::new(mock))
        } else {
            let client = HttpCorrector::from_env().map_err(|e| {
                usage(format!(
                    "method llm needs {ENV_ENDPOINT} and {ENV_API_KEY}, or --mock ({e})"
                ))
            })?;
            Some(Box::new(client))
        }
    } else {
        None
    };

    let needs_audio = wants(MethodKind::WadaSnr);
    if needs_audio && manifest.records.iter().all(|r| r.audio_path.is_none()) {
        return Err(usage("method wada_snr needs audio_path entries in the manifest"));
    }

    let config = PipelineConfig {
        dataset: common.dataset.clone(),
        language: common.language.parse::<Language>().expect("infallible"),
        methods,
        decoder,
        llm_models,
        llm_runs: llm.runs,
        temperature: llm.temperature,
        baselines: common.baselines.config(),
        jobs: jobs(common.jobs)?,
        retry: RetryPolicy {
            max_retries: llm.max_retries,
            ..RetryPolicy::default()
        },
        validation: Default::default(),
    };
    Ok(Prepared {
        manifest,
        config,
        vocab,
        lm,
        corrector,
    })
}

fn jobs(requested: Option<usize>) -> CliResult<usize> {
    match requested {
        Some(0) => Err(usage("--jobs must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn column_name(method: &Method) -> String {
    match method.run_index() {
        Some(run) => format!("{}#{run}", method.label()),
        None => method.label(),
    }
}

/// One row per utterance, one column per method and run.
fn wide_scores_csv(manifest: &Manifest, outcomes: &[harness::UtteranceOutcome]) -> anyhow::Result<String> {
    let columns: BTreeSet<&Method> = outcomes
        .iter()
        .flat_map(|o| o.scores.iter().map(|s| &s.method))
        .collect();
    let mut w = csv_writer();
    let mut header = vec!["utterance_id".to_string(), "speaker_id".into(), "timepoint_id".into()];
    header.extend(columns.iter().map(|m| column_name(m)));
    w.write_record(&header)?;
    for o in outcomes {
        let rec = manifest.get(&o.utterance_id).expect("outcome comes from the manifest");
        let mut row = vec![
            o.utterance_id.clone(),
            rec.speaker_id.clone(),
            rec.timepoint_id.clone().unwrap_or_default(),
        ];
        for m in &columns {
            row.push(
                o.scores
                    .iter()
                    .find(|s| &s.method == *m)
                    .map(|s| s.value.to_string())
                    .unwrap_or_default(),
            );
        }
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn report_failures(outcomes: &[harness::UtteranceOutcome]) {
    for f in collect_failures(outcomes) {
        eprintln!("warning: {} [{}]: {}", f.utterance_id, f.method, f.message);
    }
}

fn cmd_score(args: ScoreArgs) -> CliResult<ExitCode> {
    let methods = parse_methods(&args.methods)?;
    let prepared = prepare(&args.common, methods)?;
    let outcomes = score_manifest(&prepared.manifest, &prepared.config, prepared.assets())
        .map_err(|e| CliError::Runtime(e.into()))?;
    report_failures(&outcomes);
    emit(args.output.as_deref(), &wide_scores_csv(&prepared.manifest, &outcomes)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_baselines(args: BaselineArgs) -> CliResult<ExitCode> {
    let methods = parse_methods(&args.methods)?;
    if let Some(m) = methods
        .iter()
        .find(|m| !matches!(m, MethodKind::SpeechRate | MethodKind::WadaSnr))
    {
        return Err(usage(format!("{m} is not a baseline; use `score`")));
    }
    let manifest = load_manifest_checked(&args.manifest)?;
    if methods.contains(&MethodKind::WadaSnr) && manifest.records.iter().all(|r| r.audio_path.is_none()) {
        return Err(usage("method wada_snr needs audio_path entries in the manifest"));
    }
    let config = PipelineConfig {
        methods,
        baselines: args.baselines.config(),
        jobs: jobs(args.jobs)?,
        ..PipelineConfig::default()
    };
    let assets = Assets {
        vocab: None,
        lm: None,
        corrector: None,
    };
    let outcomes = score_manifest(&manifest, &config, assets).map_err(|e| CliError::Runtime(e.into()))?;
    report_failures(&outcomes);
    emit(args.output.as_deref(), &wide_scores_csv(&manifest, &outcomes)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: EvalArgs) -> CliResult<ExitCode> {
    let manifest = load_manifest_checked(&args.common.manifest)?;
    if !manifest.has_ratings() {
        return Err(usage(
            "manifest has no ratings; eval correlates scores with ratings (use `score` for scores alone)",
        ));
    }
    let methods = if args.methods.is_empty() {
        let c = &args.common;
        let mut m = vec![MethodKind::SpeechRate];
        if manifest.records.iter().any(|r| r.audio_path.is_some()) {
            m.push(MethodKind::WadaSnr);
        }
        if c.vocab.is_some() {
            m.push(MethodKind::ReferenceWer);
            if c.decoder.lm.is_some() {
                m.push(MethodKind::Ngram);
            }
            if c.llm.mock || !c.llm.llm_models.is_empty() {
                m.push(MethodKind::Llm);
            }
        }
        m.sort();
        m
    } else {
        parse_methods(&args.methods)?
    };
    let prepared = prepare(&args.common, methods)?;
    let out = run_pipeline(
        &prepared.manifest,
        &prepared.config,
        prepared.assets(),
        &args.output_dir,
    )
    .map_err(|e| CliError::Runtime(e.into()))?;
    report_failures(&out.outcomes);
    emit(None, &out.report.to_text())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> CliResult<ExitCode> {
    if !args.run_dir.join(harness::SCORES_FILE).is_file() {
        return Err(usage(format!("{} is not a run directory", args.run_dir.display())));
    }
    if args.llm_accuracy {
        let rows = llm_accuracy_report(&args.run_dir).map_err(|e| CliError::Runtime(e.into()))?;
        emit(None, &render_llm_accuracy(&rows))?;
        return Ok(ExitCode::SUCCESS);
    }
    let r = replay(&args.run_dir).map_err(|e| CliError::Runtime(e.into()))?;
    emit(None, &r.report.to_text())?;
    if args.check && !(r.csv_matches && r.text_matches) {
        eprintln!("error: rebuilt report differs from the stored report");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: SynthArgs) -> CliResult<ExitCode> {
    let mut config = if args.small {
        SynthConfig::small()
    } else {
        SynthConfig::standard()
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let fx = synth::generate(&args.output_dir, &config).map_err(|e| CliError::Runtime(e.into()))?;
    println!("{}", fx.manifest_path.display());
    Ok(ExitCode::SUCCESS)
}
