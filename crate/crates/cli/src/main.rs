use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use imageability::analysis::Aggregation;
use imageability::deformance::DeformanceKind;
use imageability::genbridge::protocol::serve_mock;
use imageability::genbridge::{GenerationConfig, SyntheticOracle, DEFAULT_DIM};
use imageability::metrics::ScoreOptions;
use imageability::pipeline::{
    stages, BackendConfig, CorpusSources, LexiconSources, Pipeline, PipelineError, PrepareConfig,
    ReportConfig, ReportInputs, RunConfig, RunSummary, Stage, StageError,
};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "imageability",
    version,
    about = "Imageability measurement pipeline"
)]
struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw norms into the canonical lexicon.
    IngestLexicon(IngestArgs),
    /// Build the original-prompt manifest from corpora.
    PreparePrompts(PrepareArgs),
    /// Add deformed variants of every original prompt.
    Deform(DeformArgs),
    /// Fetch images and embeddings for a manifest.
    Generate(GenerateArgs),
    /// Compute per-prompt scores.
    Score(ScoreArgs),
    /// Aggregate score files into report tables and plots.
    Report(ReportArgs),
    /// Run stages from a TOML configuration.
    Run(RunArgs),
    /// Serve the synthetic generator over the wire protocol (stdio or TCP).
    #[command(hide = true)]
    MockSidecar(SidecarArgs),
}

#[derive(Args, Serialize)]
struct IngestArgs {
    #[arg(long)]
    mrc: Option<PathBuf>,
    /// TOML column layout overriding the bundled MRC layout.
    #[arg(long)]
    mrc_layout: Option<PathBuf>,
    #[arg(long)]
    mrc_include_all: bool,
    #[arg(long)]
    brysbaert: Option<PathBuf>,
    /// Validate and copy an existing canonical lexicon.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PrepareArgs {
    #[arg(long)]
    poems: Option<PathBuf>,
    #[arg(long)]
    captions: Option<PathBuf>,
    /// Articles separated by blank lines.
    #[arg(long)]
    news: Option<PathBuf>,
    /// Add one prompt per rated word (needs --lexicon).
    #[arg(long)]
    words: bool,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    n_captions: usize,
    #[arg(long, default_value_t = 5000)]
    n_news: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct DeformArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    /// Comma-separated subset of backward, permuted, just_nouns, replaced_nouns.
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<DeformanceKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GenerateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Image store; existing rows are reused as a cache.
    #[arg(long)]
    store: PathBuf,
    /// `mock`, `stdio:<command>` or `tcp:<host:port>`.
    #[arg(long, default_value = "mock")]
    backend: String,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = 16)]
    n_images: u8,
    #[arg(long, default_value_t = 0.85)]
    temperature: f64,
    #[arg(long, default_value_t = 3)]
    cond_scale: u8,
    #[arg(long, default_value = "mini-1:v0")]
    model_tag: String,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    #[arg(long, default_value_t = 250)]
    backoff_ms: u64,
    #[arg(long, default_value_t = 32)]
    max_in_flight: usize,
    /// Seed of the mock backend's synthetic generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct ScoreArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long, default_value_t = 50)]
    k_nn: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum AggregationArg {
    MeanOfPairs,
    ChangeOfMeans,
}

#[derive(Args, Serialize)]
struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    scores: Vec<PathBuf>,
    /// `#ratings v1` file keyed by prompt id or `w:<word>`.
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Manifest with prompt texts, for the word-frequency control.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0.10)]
    q: f64,
    #[arg(long, value_enum, default_value = "mean-of-pairs")]
    aggregation: AggregationArg,
    #[arg(long)]
    no_svg: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated stages to run; all when omitted.
    #[arg(long, value_delimiter = ',')]
    stages: Vec<Stage>,
}

#[derive(Args)]
struct SidecarArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    /// Accept TCP connections on this address instead of serving stdio.
    #[arg(long)]
    listen: Option<String>,
}

fn header<T: Serialize>(command: &str, args: &T) -> Vec<(String, String)> {
    let mut value = serde_json::to_value(args).unwrap_or(Value::Null);
    if let Value::Object(map) = &mut value {
        map.insert("command".into(), json!(command));
    }
    vec![("config".into(), value.to_string())]
}

fn at(stage: Stage) -> impl FnOnce(StageError) -> PipelineError {
    move |source| PipelineError { stage, source }
}

fn emit(value: Value) {
    println!("{value}");
}

fn summarize(summary: &RunSummary) {
    if let Some(s) = &summary.ingest {
        emit(
            json!({"stage": "ingest", "words": s.words, "with_imageability": s.with_imageability,
            "malformed": s.malformed, "filtered": s.filtered, "conflicts": s.conflicts}),
        );
    }
    if let Some(s) = &summary.prepare {
        emit(
            json!({"stage": "prepare", "poems": s.poems, "captions": s.captions,
            "news": s.news, "news_eligible": s.news_eligible, "words": s.words}),
        );
    }
    if let Some(s) = &summary.deform {
        emit(
            json!({"stage": "deform", "originals": s.originals, "deformed": s.deformed,
            "empty": s.empty, "replaced": s.replaced, "no_alternative": s.no_alternative}),
        );
    }
    if let Some(s) = &summary.generate {
        emit(
            json!({"stage": "generate", "requested": s.requested, "cache_hits": s.cache_hits,
            "hit_rate": s.hit_rate(), "failed": s.failed, "rows": s.rows,
            "backend_requests": s.backend_requests}),
        );
    }
    if let Some(s) = &summary.score {
        emit(
            json!({"stage": "score", "prompts": s.prompts, "with_images": s.with_images,
            "missing": s.missing}),
        );
    }
    if let Some(r) = &summary.report {
        let written: Vec<String> = r.written.iter().map(|p| p.display().to_string()).collect();
        emit(json!({"stage": "report", "written": written, "skipped": r.skipped}));
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut summary = RunSummary::default();
    match cli.command {
        Command::IngestLexicon(a) => {
            let sources = LexiconSources {
                mrc: a.mrc.clone(),
                mrc_layout: a.mrc_layout.clone(),
                mrc_include_all: a.mrc_include_all,
                brysbaert: a.brysbaert.clone(),
                lexicon: a.lexicon.clone(),
            };
            let h = header("ingest-lexicon", &a);
            summary.ingest = Some(stages::ingest(&sources, &a.out, &h).map_err(at(Stage::Ingest))?);
        }
        Command::PreparePrompts(a) => {
            let sources = CorpusSources {
                poems: a.poems.clone(),
                captions: a.captions.clone(),
                news: a.news.clone(),
            };
            let settings = PrepareConfig {
                captions: a.n_captions,
                news: a.n_news,
                words: a.words,
            };
            let h = header("prepare-prompts", &a);
            summary.prepare = Some(
                stages::prepare(
                    &sources,
                    a.lexicon.as_deref(),
                    &settings,
                    a.seed,
                    &a.out,
                    &h,
                )
                .map_err(at(Stage::Prepare))?,
            );
        }
        Command::Deform(a) => {
            let kinds = if a.kinds.is_empty() {
                DeformanceKind::ALL.to_vec()
            } else {
                a.kinds.clone()
            };
            let h = header("deform", &a);
            summary.deform = Some(
                stages::deform(&a.manifest, &a.lexicon, &kinds, a.seed, &a.out, &h)
                    .map_err(at(Stage::Deform))?,
            );
        }
        Command::Generate(a) => {
            let generation = GenerationConfig {
                n_images: a.n_images,
                temperature: a.temperature,
                cond_scale: a.cond_scale,
                model_tag: a.model_tag.clone(),
            };
            let backend = BackendConfig {
                spec: a.backend.clone(),
                dim: a.dim,
                retries: a.retries,
                backoff_ms: a.backoff_ms,
                max_in_flight: a.max_in_flight,
            };
            let oracle = Arc::new(SyntheticOracle::hashed(a.seed, a.dim));
            let h = header("generate", &a);
            summary.generate = Some(
                stages::generate(&a.manifest, &a.store, &generation, &backend, oracle, &h)
                    .map_err(at(Stage::Generate))?,
            );
        }
        Command::Score(a) => {
            let options = ScoreOptions { k_nn: a.k_nn };
            let h = header("score", &a);
            summary.score = Some(
                stages::score(&a.manifest, &a.store, &a.lexicon, &options, &a.out, &h)
                    .map_err(at(Stage::Score))?,
            );
        }
        Command::Report(a) => {
            let inputs = ReportInputs {
                scores: a.scores.clone(),
                ratings: a.ratings.clone(),
                lexicon: a.lexicon.clone(),
                manifest: a.manifest.clone(),
            };
            let settings = ReportConfig {
                q: a.q,
                svg: !a.no_svg,
                aggregation: match a.aggregation {
                    AggregationArg::MeanOfPairs => Aggregation::MeanOfPairs,
                    AggregationArg::ChangeOfMeans => Aggregation::ChangeOfMeans,
                },
            };
            let h = header("report", &a);
            summary.report = Some(
                stages::report(&inputs, &settings, &a.out_dir, &h).map_err(at(Stage::Report))?,
            );
        }
        Command::Run(a) => {
            let config = RunConfig::load(&a.config).map_err(anyhow::Error::msg)?;
            let selected = if a.stages.is_empty() {
                Stage::ALL.to_vec()
            } else {
                a.stages
            };
            summary = Pipeline::new(config).run(&selected)?;
        }
        Command::MockSidecar(a) => return sidecar(a),
    }
    summarize(&summary);
    Ok(())
}

fn sidecar(args: SidecarArgs) -> Result<()> {
    let oracle = Arc::new(SyntheticOracle::hashed(args.seed, args.dim));
    match args.listen {
        None => {
            let stdin = std::io::stdin().lock();
            let stdout = std::io::stdout().lock();
            let served = serve_mock(stdin, stdout, &oracle)?;
            log::info!("served {served} requests");
        }
        Some(addr) => {
            let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
            println!("{}", listener.local_addr()?);
            std::io::stdout().flush()?;
            for stream in listener.incoming() {
                let stream = stream?;
                let oracle = Arc::clone(&oracle);
                std::thread::spawn(move || {
                    let reader = match stream.try_clone() {
                        Ok(s) => BufReader::new(s),
                        Err(e) => return log::warn!("connection: {e}"),
                    };
                    if let Err(e) = serve_mock(reader, stream, &oracle) {
                        log::warn!("connection: {e}");
                    }
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = match e.downcast_ref::<PipelineError>() {
                Some(p) => p.record(),
                None => json!({"kind": "error", "message": format!("{e:#}")}),
            };
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
