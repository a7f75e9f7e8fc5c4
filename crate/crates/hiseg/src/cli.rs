//! The `hiseg` command line. [`run`] takes the raw argument vector and
//! returns what the binary prints on success.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use hiseg_core::corpus::{GoldSegmentation, GroupedCorpus, PrevScope};
use hiseg_core::dos::{self, DosClassification};
use hiseg_core::eval::{self, AlignmentThresholds};
use hiseg_core::generative::{self, GenerativeConfig, GenerativeMode, SizeAxis, SizeConcentration};
use hiseg_core::inference::{self, InferenceParams};
use hiseg_core::topics::{self, InitTopicsParams, TopicMatrix};
use serde::Serialize;
use serde_json::json;

use crate::config;
use crate::error::{CliError, Result};
use crate::io;
use crate::manifest::{RunManifest, ARTIFACT_VERSION, MANIFEST_FILE};
use crate::report::{self, PipelineReport};

#[derive(Parser, Debug)]
#[command(
    name = "hiseg",
    version,
    about = "Hierarchical Bayesian segmentation of grouped transcripts"
)]
pub struct Cli {
    /// Seed of every random stream in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output format of the summary printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse, classify and list DoS classification strings.
    #[command(subcommand)]
    Dos(DosCommand),
    /// Forward-sample a synthetic corpus with gold boundaries and true topics.
    Generate(GenerateArgs),
    /// Learn topics by clustering initial level-1 segments.
    LearnTopics(LearnTopicsArgs),
    /// Run the hierarchical blocked Gibbs sampler.
    Infer(InferArgs),
    /// Run the Markov-only baseline (level-1 boundaries only).
    Baseline(BaselineArgs),
    /// Score predicted boundaries against gold.
    Evaluate(EvaluateArgs),
    /// Generate or load, learn topics, infer, run the baseline and evaluate.
    Pipeline(PipelineArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Subcommand, Debug)]
pub enum DosCommand {
    /// Parse a classification string and print its canonical form.
    Parse { dos: String },
    /// Print the named model a classification string denotes, or "unknown".
    Classify { dos: String },
    /// Print the table of named models.
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    News,
    Dpmm,
    StickyHmm,
    FiniteLda,
    NdpMask,
}

impl From<Mode> for GenerativeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::News => GenerativeMode::NewsTranscript,
            Mode::Dpmm => GenerativeMode::Dpmm,
            Mode::StickyHmm => GenerativeMode::StickyHmm,
            Mode::FiniteLda => GenerativeMode::FiniteLda,
            Mode::NdpMask => GenerativeMode::NdpMask,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    Transcript,
    Sentence,
}

impl From<Scope> for PrevScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::Transcript => PrevScope::Transcript,
            Scope::Sentence => PrevScope::Sentence,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Sentences,
    Tokens,
}

/// Flat key-value file whose keys are flag names of the subcommand.
#[derive(Args, Debug, Clone)]
pub struct ConfigArg {
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

/// Overrides of the generative configuration.
#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// Categories (level-2 segments per transcript).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub transcripts: Option<usize>,
    /// Sentences per transcript: `N` or `MIN,MAX`.
    #[arg(long, value_parser = parse_range)]
    pub sentences: Option<(usize, usize)>,
    /// Tokens per sentence: `N` or `MIN,MAX`.
    #[arg(long, value_parser = parse_range)]
    pub tokens_per_sentence: Option<(usize, usize)>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub gen_alpha: Option<f64>,
    #[arg(long)]
    pub gen_beta: Option<f64>,
    /// Segment-size concentration: `G` or `G1,...,GK`.
    #[arg(long, value_parser = parse_gamma)]
    pub gen_gamma: Option<SizeConcentration>,
    #[arg(long)]
    pub gen_rho: Option<f64>,
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long)]
    pub topic_cap: Option<usize>,
    #[arg(long, value_enum)]
    pub size_axis: Option<Axis>,
    #[arg(long, value_enum)]
    pub gen_prev_scope: Option<Scope>,
    #[arg(long)]
    pub category_base_strength: Option<f64>,
    #[arg(long)]
    pub cluster_alpha: Option<f64>,
    #[arg(long)]
    pub lda_topics: Option<usize>,
}

impl DataArgs {
    fn apply(&self, c: &mut GenerativeConfig) {
        macro_rules! set {
            ($($f:ident => $g:ident),*) => {$(if let Some(v) = self.$f.clone() { c.$g = v; })*};
        }
        set!(
            k => k, transcripts => transcripts, sentences => sentences, tokens_per_sentence => tokens_per_sentence,
            vocab_size => vocab_size, gen_alpha => alpha, gen_beta => beta, gen_gamma => gamma, gen_rho => rho,
            truncation => truncation, category_base_strength => category_base_strength,
            cluster_alpha => cluster_alpha, lda_topics => lda_topics
        );
        if self.topic_cap.is_some() {
            c.topic_cap = self.topic_cap;
        }
        if let Some(a) = self.size_axis {
            c.size_axis = match a {
                Axis::Sentences => SizeAxis::Sentences,
                Axis::Tokens => SizeAxis::Tokens,
            };
        }
        if let Some(s) = self.gen_prev_scope {
            c.prev_scope = s.into();
        }
    }
}

/// Overrides of the sampler parameters.
#[derive(Args, Debug, Clone, Default)]
pub struct SamplerArgs {
    /// Maximum number of sweeps.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Segment-size concentration: `G` or `G1,...,GK`.
    #[arg(long, value_parser = parse_gamma)]
    pub gamma: Option<SizeConcentration>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Relative joint log-likelihood change that stops the run.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Run every sweep regardless of convergence.
    #[arg(long, conflicts_with = "epsilon")]
    pub no_early_stop: bool,
    /// Largest distance a changepoint may move in one step.
    #[arg(long)]
    pub candidate_window: Option<usize>,
    #[arg(long, value_enum)]
    pub prev_scope: Option<Scope>,
    /// Keep the topic rows fixed.
    #[arg(long)]
    pub fixed_topics: bool,
    /// Forbid stories outside the given topics.
    #[arg(long)]
    pub no_new_topics: bool,
    /// Half-width in tokens of the window that scores new stories in proposals.
    #[arg(long)]
    pub proposal_window: Option<usize>,
    /// Keep the one-category-per-topic rule during all of burn-in.
    #[arg(long)]
    pub no_relax: bool,
}

impl SamplerArgs {
    fn apply(&self, p: &mut InferenceParams) {
        macro_rules! set {
            ($($f:ident => $g:ident),*) => {$(if let Some(v) = self.$f.clone() { p.$g = v; })*};
        }
        set!(iters => iterations, burn_in => burn_in, alpha => alpha, beta => beta, gamma => gamma, rho => rho, proposal_window => proposal_window);
        if self.epsilon.is_some() {
            p.epsilon = self.epsilon;
        }
        if self.no_early_stop {
            p.epsilon = None;
        }
        if self.candidate_window.is_some() {
            p.candidate_window = self.candidate_window;
        }
        if let Some(s) = self.prev_scope {
            p.prev_scope = s.into();
        }
        p.update_phi &= !self.fixed_topics;
        p.allow_new_topics &= !self.no_new_topics;
        p.relax_burn_in &= !self.no_relax;
    }
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_enum, default_value_t = Mode::News)]
    pub mode: Mode,
    /// Classification string selecting the generator instead of --mode.
    #[arg(long)]
    pub dos: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct LearnTopicsArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Gold-format file whose level-1 boundaries give the initial segments.
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    /// Categories (level-2 segments per transcript).
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    /// Sampler settings; `--burn-in` and `--gamma` do not apply.
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Corpus supplying token offsets missing from the gold file.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Alignment thresholds in tokens: `LEVEL1,LEVEL2`.
    #[arg(long, value_parser = parse_thresholds, default_value = "10,500")]
    pub thresholds: AlignmentThresholds,
    /// Directory receiving the report and a manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Load this corpus instead of generating one (requires --gold).
    #[arg(long, requires = "gold")]
    pub corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub gold: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, value_parser = parse_thresholds, default_value = "10,50")]
    pub thresholds: AlignmentThresholds,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory replacing the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |x: &str| {
        x.parse::<usize>()
            .map_err(|_| format!("{x:?} is not a count"))
    };
    match parts.as_slice() {
        [n] => num(n).map(|n| (n, n)),
        [a, b] => {
            let (a, b) = (num(a)?, num(b)?);
            if a > b {
                return Err(format!("{a} exceeds {b}"));
            }
            Ok((a, b))
        }
        _ => Err("expected N or MIN,MAX".into()),
    }
}

fn parse_gamma(s: &str) -> std::result::Result<SizeConcentration, String> {
    let v = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| format!("{x:?} is not a number"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(if v.len() == 1 {
        SizeConcentration::Symmetric(v[0])
    } else {
        SizeConcentration::Vector(v)
    })
}

fn parse_thresholds(s: &str) -> std::result::Result<AlignmentThresholds, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |x: &str| {
        x.parse::<usize>()
            .map_err(|_| format!("{x:?} is not a count"))
    };
    match parts.as_slice() {
        [a, b] => Ok(AlignmentThresholds {
            level1: num(a)?,
            level2: num(b)?,
        }),
        _ => Err("expected LEVEL1,LEVEL2".into()),
    }
}

const SUBCOMMANDS: [&str; 8] = [
    "dos",
    "generate",
    "learn-topics",
    "infer",
    "baseline",
    "evaluate",
    "pipeline",
    "replay",
];

/// Replace `--config FILE` by the flags the file holds, inserted right after
/// the subcommand name.
pub fn expand_config(args: &[String], config_dir: Option<&Path>) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(args.len());
    let mut config = None;
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        if a == "--config" {
            let v = args
                .get(i + 1)
                .ok_or_else(|| CliError::Config("--config needs a value".into()))?;
            config = Some(PathBuf::from(v));
            i += 2;
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else {
            out.push(a.clone());
        }
        i += 1;
    }
    let Some(path) = config else { return Ok(out) };
    let mut j = 1;
    while j < out.len() && !SUBCOMMANDS.contains(&out[j].as_str()) {
        j += if (out[j] == "--seed" || out[j] == "--format") && j + 1 < out.len() {
            2
        } else {
            1
        };
    }
    if j == out.len() {
        return Err(CliError::Config("--config needs a subcommand".into()));
    }
    let extra = config::load(&path, config_dir)?;
    out.splice(j + 1..j + 1, extra);
    Ok(out)
}

/// The clap command tree, with later flags overriding earlier ones.
pub fn command() -> clap::Command {
    fn overridable(c: clap::Command) -> clap::Command {
        c.args_override_self(true).mut_subcommands(overridable)
    }
    overridable(Cli::command())
}

/// Help text of the top-level command.
pub fn help() -> String {
    command().render_long_help().to_string()
}

pub fn parse(args: &[String]) -> Result<Option<Cli>> {
    match command().try_get_matches_from(args) {
        Ok(m) => Cli::from_arg_matches(&m)
            .map(Some)
            .map_err(|e| CliError::Config(first_line(&e.to_string()))),
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            Ok(None)
        }
        Err(e) => Err(CliError::Config(first_line(&e.to_string()))),
    }
}

/// Clap's message without the usage block, on one line.
fn first_line(s: &str) -> String {
    let lines: Vec<&str> = s
        .lines()
        .take_while(|l| !l.starts_with("Usage:"))
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    lines.join(" ").trim_start_matches("error: ").to_string()
}

/// Execute a full argument vector (program name first) and return stdout.
pub fn run(args: Vec<String>, config_dir: Option<&Path>) -> Result<String> {
    let args = expand_config(&args, config_dir)?;
    let cli = match parse(&args)? {
        Some(cli) => cli,
        None => {
            return match command().try_get_matches_from(&args) {
                Err(e) => Ok(e.render().to_string()),
                Ok(_) => Ok(String::new()),
            }
        }
    };
    let ctx = Ctx {
        argv: args[1..].to_vec(),
        seed: cli.seed,
        format: cli.format,
        started: Instant::now(),
    };
    match &cli.command {
        Command::Dos(c) => cmd_dos(&ctx, c),
        Command::Generate(a) => cmd_generate(&ctx, a),
        Command::LearnTopics(a) => cmd_learn_topics(&ctx, a),
        Command::Infer(a) => cmd_infer(&ctx, a),
        Command::Baseline(a) => cmd_baseline(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Pipeline(a) => cmd_pipeline(&ctx, a),
        Command::Replay(a) => cmd_replay(a, config_dir),
    }
}

struct Ctx {
    argv: Vec<String>,
    seed: u64,
    format: Format,
    started: Instant,
}

impl Ctx {
    fn emit(&self, text: String, value: serde_json::Value) -> String {
        match self.format {
            Format::Text => text,
            Format::Json => {
                let mut s = serde_json::to_string(&value).expect("summary serializes");
                s.push('\n');
                s
            }
        }
    }
}

/// Files produced by one run, written together with their manifest.
struct Artifacts {
    files: Vec<(&'static str, String)>,
    inputs: BTreeMap<String, String>,
}

impl Artifacts {
    fn new() -> Self {
        Artifacts {
            files: Vec::new(),
            inputs: BTreeMap::new(),
        }
    }

    fn file(&mut self, name: &'static str, contents: String) {
        self.files.push((name, contents));
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.into(), path.display().to_string());
    }

    fn write(
        self,
        ctx: &Ctx,
        subcommand: &str,
        params: serde_json::Value,
        out: &Path,
    ) -> Result<Vec<String>> {
        for (name, contents) in &self.files {
            io::write_atomic(&out.join(name), contents.as_bytes())?;
        }
        let outputs: Vec<String> = self.files.iter().map(|(n, _)| n.to_string()).collect();
        RunManifest {
            subcommand: subcommand.into(),
            argv: ctx.argv.clone(),
            params,
            seed: ctx.seed,
            inputs: self.inputs,
            outputs: outputs.clone(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            artifact_version: ARTIFACT_VERSION,
            duration_ms: ctx.started.elapsed().as_secs_f64() * 1e3,
        }
        .write(out)?;
        Ok(outputs)
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("parameters serialize")
}

fn written(ctx: &Ctx, out: &Path, files: &[String], extra: serde_json::Value) -> String {
    let mut text = format!("wrote {} files to {}\n", files.len() + 1, out.display());
    if let serde_json::Value::Object(m) = &extra {
        for (k, v) in m {
            text.push_str(&format!("{k}: {v}\n"));
        }
    }
    ctx.emit(
        text,
        json!({ "out": out.display().to_string(), "files": files, "summary": extra }),
    )
}

fn cmd_dos(ctx: &Ctx, c: &DosCommand) -> Result<String> {
    match c {
        DosCommand::Parse { dos } => {
            let parsed = dos::parse_dos(dos)?;
            let canonical = dos::format_dos(&parsed);
            let model = dos::lookup_known_model(&parsed);
            let text = format!(
                "canonical: {canonical}\nlevels: {}\nmodel: {}\n",
                parsed.levels,
                model.unwrap_or("unknown")
            );
            Ok(ctx.emit(text, json!({ "input": dos, "canonical": canonical, "model": model, "classification": parsed })))
        }
        DosCommand::Classify { dos } => {
            let parsed: DosClassification = dos::parse_dos(dos)?;
            let model = dos::lookup_known_model(&parsed);
            Ok(ctx.emit(
                format!("{}\n", model.unwrap_or("unknown")),
                json!({ "input": dos, "model": model }),
            ))
        }
        DosCommand::Table => {
            let text = dos::KNOWN_MODELS
                .iter()
                .map(|(name, s)| format!("{name:<16}{s}\n"))
                .collect();
            let rows: Vec<_> = dos::KNOWN_MODELS
                .iter()
                .map(|(name, s)| json!({ "model": name, "dos": s }))
                .collect();
            Ok(ctx.emit(text, serde_json::Value::Array(rows)))
        }
    }
}

fn generate(cfg: &GenerativeConfig) -> Result<generative::SyntheticCorpus> {
    Ok(match cfg.mode {
        GenerativeMode::NewsTranscript => generative::sample_news(cfg)?,
        _ => generative::sample_gbm(cfg)?,
    })
}

fn synthetic_files(a: &mut Artifacts, s: &generative::SyntheticCorpus) {
    a.file("corpus.jsonl", io::corpus_to_jsonl(&s.corpus));
    a.file("corpus.vocab", io::synthetic_vocab(s.corpus.vocab_size));
    a.file("gold.jsonl", io::gold_to_jsonl(&s.gold));
    a.file("truth.jsonl", io::state_to_jsonl(&s.truth, &s.corpus));
    a.file("truth.topics", io::topics_to_string(&s.topics));
}

fn cmd_generate(ctx: &Ctx, args: &GenerateArgs) -> Result<String> {
    let mut cfg = match &args.dos {
        Some(d) => dos::to_generative_config(&dos::parse_dos(d)?)?,
        None => GenerativeConfig::for_mode(args.mode.into()),
    };
    args.data.apply(&mut cfg);
    cfg.seed = ctx.seed;
    let s = generate(&cfg)?;
    let mut a = Artifacts::new();
    synthetic_files(&mut a, &s);
    let files = a.write(ctx, "generate", to_value(&cfg), &args.out)?;
    let summary = json!({
        "transcripts": s.corpus.transcripts.len(),
        "tokens": s.corpus.num_tokens(),
        "topics": s.topics.num_topics(),
    });
    Ok(written(ctx, &args.out, &files, summary))
}

fn level1_of(gold: &GoldSegmentation) -> Vec<Vec<usize>> {
    gold.transcripts.iter().map(|t| t.level1.clone()).collect()
}

fn load_gold(path: &Path, corpus: &GroupedCorpus) -> Result<GoldSegmentation> {
    let mut gold = io::read_gold(path)?;
    gold.validate(corpus, None)
        .map_err(|e| CliError::io(path, e))?;
    io::attach_offsets(&mut gold, corpus);
    Ok(gold)
}

fn cmd_learn_topics(ctx: &Ctx, args: &LearnTopicsArgs) -> Result<String> {
    let corpus = io::read_corpus(&args.corpus)?;
    let gold = load_gold(&args.segments, &corpus)?;
    let d = InitTopicsParams::default();
    let params = InitTopicsParams {
        alpha: args.alpha.unwrap_or(d.alpha),
        beta: args.beta.unwrap_or(d.beta),
        iters: args.iters.unwrap_or(d.iters),
        seed: ctx.seed,
    };
    let m = topics::init_topics(&corpus, &level1_of(&gold), &params)?;
    let mut a = Artifacts::new();
    a.input("corpus", &args.corpus);
    a.input("segments", &args.segments);
    a.file("topics.topics", io::topics_to_string(&m));
    let files = a.write(ctx, "learn-topics", to_value(&params), &args.out)?;
    Ok(written(
        ctx,
        &args.out,
        &files,
        json!({ "topics": m.num_topics() }),
    ))
}

fn inference_params(
    ctx: &Ctx,
    base: InferenceParams,
    k: Option<usize>,
    sampler: &SamplerArgs,
) -> InferenceParams {
    let mut p = base;
    sampler.apply(&mut p);
    if let Some(k) = k {
        p.k = k;
    }
    p.seed = ctx.seed;
    p
}

fn load_inputs(corpus: &Path, topics: &Path) -> Result<(GroupedCorpus, TopicMatrix)> {
    let c = io::read_corpus(corpus)?;
    let t = io::read_topics(topics)?;
    if t.vocab_size != c.vocab_size {
        return Err(CliError::Config(format!(
            "{}: topics cover {} words but the corpus vocabulary has {}",
            topics.display(),
            t.vocab_size,
            c.vocab_size
        )));
    }
    Ok((c, t))
}

fn cmd_infer(ctx: &Ctx, args: &InferArgs) -> Result<String> {
    let (corpus, init) = load_inputs(&args.corpus, &args.topics)?;
    let params = inference_params(ctx, InferenceParams::default(), args.k, &args.sampler);
    let result = inference::run(&corpus, Some(&init), &params)?;
    let pred = GoldSegmentation::from_state(&result.state, &corpus)?;
    let mut a = Artifacts::new();
    a.input("corpus", &args.corpus);
    a.input("topics", &args.topics);
    a.file("state.jsonl", io::state_to_jsonl(&result.state, &corpus));
    a.file("trace.jsonl", io::to_jsonl(&result.trace));
    a.file("pred.jsonl", io::gold_to_jsonl(&pred));
    a.file("topics.topics", io::topics_to_string(&result.topics));
    let files = a.write(ctx, "infer", to_value(&params), &args.out)?;
    let summary = json!({
        "sweeps": result.trace.len(),
        "kept": result.kept,
        "converged": result.converged,
        "joint_ll": result.trace.last().map(|t| t.joint_ll),
    });
    Ok(written(ctx, &args.out, &files, summary))
}

fn cmd_baseline(ctx: &Ctx, args: &BaselineArgs) -> Result<String> {
    let (corpus, init) = load_inputs(&args.corpus, &args.topics)?;
    let params = inference_params(ctx, InferenceParams::default(), None, &args.sampler);
    let level1 = inference::baseline_markov(&corpus, &init, &params)?;
    let pred = io::prediction(&corpus, &level1, &[]);
    let mut a = Artifacts::new();
    a.input("corpus", &args.corpus);
    a.input("topics", &args.topics);
    a.file("pred.jsonl", io::gold_to_jsonl(&pred));
    let files = a.write(ctx, "baseline", to_value(&params), &args.out)?;
    let boundaries: usize = level1.iter().map(Vec::len).sum();
    Ok(written(
        ctx,
        &args.out,
        &files,
        json!({ "level1_boundaries": boundaries }),
    ))
}

fn cmd_evaluate(ctx: &Ctx, args: &EvaluateArgs) -> Result<String> {
    let mut gold = io::read_gold(&args.gold)?;
    let mut pred = io::read_gold(&args.pred)?;
    if let Some(path) = &args.corpus {
        let corpus = io::read_corpus(path)?;
        io::attach_offsets(&mut gold, &corpus);
        io::attach_offsets(&mut pred, &corpus);
    }
    let r = eval::evaluate(&gold, &pred, &args.thresholds)?;
    let text = report::render_segmentation(&r);
    let value = to_value(&r);
    if let Some(out) = &args.out {
        let mut a = Artifacts::new();
        a.input("gold", &args.gold);
        a.input("pred", &args.pred);
        if let Some(c) = &args.corpus {
            a.input("corpus", c);
        }
        a.file("report.txt", text.clone());
        a.file(
            "report.json",
            format!(
                "{}\n",
                serde_json::to_string_pretty(&r).expect("report serializes")
            ),
        );
        a.write(
            ctx,
            "evaluate",
            json!({ "thresholds": args.thresholds }),
            out,
        )?;
    }
    Ok(ctx.emit(text, value))
}

/// Generation defaults of the pipeline: about 500 tokens per transcript.
pub fn pipeline_data_defaults() -> GenerativeConfig {
    GenerativeConfig {
        k: 3,
        transcripts: 5,
        sentences: (28, 32),
        tokens_per_sentence: (15, 19),
        ..GenerativeConfig::news()
    }
}

pub fn pipeline_sampler_defaults() -> InferenceParams {
    InferenceParams {
        k: 3,
        iterations: 100,
        burn_in: 50,
        epsilon: None,
        ..InferenceParams::default()
    }
}

fn cmd_pipeline(ctx: &Ctx, args: &PipelineArgs) -> Result<String> {
    let mut a = Artifacts::new();
    let mut gen_cfg = None;
    let (corpus, gold) = match (&args.corpus, &args.gold) {
        (Some(c), Some(g)) => {
            let corpus = io::read_corpus(c)?;
            let gold = load_gold(g, &corpus)?;
            a.input("corpus", c);
            a.input("gold", g);
            (corpus, gold)
        }
        _ => {
            let mut cfg = pipeline_data_defaults();
            args.data.apply(&mut cfg);
            cfg.seed = ctx.seed;
            let s = generate(&cfg)?;
            synthetic_files(&mut a, &s);
            gen_cfg = Some(cfg);
            (s.corpus, s.gold)
        }
    };
    let init_params = InitTopicsParams {
        seed: ctx.seed,
        ..InitTopicsParams::default()
    };
    let init = topics::init_topics(&corpus, &level1_of(&gold), &init_params)?;
    let params = inference_params(ctx, pipeline_sampler_defaults(), args.data.k, &args.sampler);
    let result = inference::run(&corpus, Some(&init), &params)?;
    let pred = GoldSegmentation::from_state(&result.state, &corpus)?;
    let base = io::prediction(
        &corpus,
        &inference::baseline_markov(&corpus, &init, &params)?,
        &[],
    );
    let report = PipelineReport {
        index_base: 0,
        gi_bgs: eval::evaluate(&gold, &pred, &args.thresholds)?,
        baseline: eval::evaluate(&gold, &base, &args.thresholds)?,
    };
    let text = report::render_pipeline(&report);
    a.file("topics-init.topics", io::topics_to_string(&init));
    a.file("topics.topics", io::topics_to_string(&result.topics));
    a.file("state.jsonl", io::state_to_jsonl(&result.state, &corpus));
    a.file("trace.jsonl", io::to_jsonl(&result.trace));
    a.file("pred.jsonl", io::gold_to_jsonl(&pred));
    a.file("baseline.jsonl", io::gold_to_jsonl(&base));
    a.file("report.txt", text.clone());
    a.file(
        "report.json",
        format!(
            "{}\n",
            serde_json::to_string_pretty(&report).expect("report serializes")
        ),
    );
    let params_value = json!({
        "generate": gen_cfg,
        "init_topics": init_params,
        "inference": params,
        "thresholds": args.thresholds,
    });
    a.write(ctx, "pipeline", params_value, &args.out)?;
    Ok(ctx.emit(text, to_value(&report)))
}

fn cmd_replay(args: &ReplayArgs, config_dir: Option<&Path>) -> Result<String> {
    let m = RunManifest::read(&args.manifest)?;
    if m.subcommand == "replay" {
        return Err(CliError::Config(format!(
            "{}: a replay manifest cannot be replayed",
            args.manifest.display()
        )));
    }
    let mut argv = Vec::with_capacity(m.argv.len() + 3);
    argv.push("hiseg".to_string());
    argv.extend(m.argv);
    if let Some(out) = &args.out {
        argv.push("--out".into());
        argv.push(out.display().to_string());
    }
    run(argv, config_dir)
}

/// Files a run wrote besides its manifest, for determinism checks.
pub fn artifact_files(dir: &Path) -> Result<Vec<String>> {
    let m = RunManifest::read(&dir.join(MANIFEST_FILE))?;
    Ok(m.outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        command().debug_assert();
    }

    #[test]
    fn config_expands_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("c.toml"),
            "k = 4\nfixed-topics = true\nno-relax = false\ngen-gamma = [1, 2]\n",
        )
        .unwrap();
        let args: Vec<String> = [
            "hiseg", "--seed", "3", "pipeline", "--config", "c.toml", "--k", "2", "--out", "o",
        ]
        .map(String::from)
        .to_vec();
        let out = expand_config(&args, Some(dir.path())).unwrap();
        assert_eq!(
            out,
            [
                "hiseg",
                "--seed",
                "3",
                "pipeline",
                "--fixed-topics",
                "--gen-gamma",
                "1,2",
                "--k",
                "4",
                "--k",
                "2",
                "--out",
                "o"
            ]
        );
        let cli = parse(&out).unwrap().unwrap();
        let Command::Pipeline(p) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(p.data.k, Some(2));
        assert!(p.sampler.fixed_topics);
        assert_eq!(
            p.data.gen_gamma,
            Some(SizeConcentration::Vector(vec![1.0, 2.0]))
        );
        assert_eq!(cli.seed, 3);
    }

    #[test]
    fn ranges_and_thresholds_parse() {
        assert_eq!(parse_range("7"), Ok((7, 7)));
        assert_eq!(parse_range("3, 9"), Ok((3, 9)));
        assert!(parse_range("9,3").is_err());
        assert_eq!(
            parse_thresholds("10,500"),
            Ok(AlignmentThresholds {
                level1: 10,
                level2: 500
            })
        );
        assert!(parse_thresholds("10").is_err());
    }
}
