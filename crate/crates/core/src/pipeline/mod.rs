//! End-to-end orchestration: configuration, stage functions and the runner.

mod config;
pub mod stages;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{AnalysisError, ReportFiles};
use crate::corpus::ManifestError;
use crate::genbridge::{BridgeError, StoreError, SyntheticOracle};
use crate::lexicon::LexiconError;
use crate::metrics::ScoresError;

pub use config::*;
pub use stages::{
    CorpusSources, DeformStageSummary, GenerateSummary, IngestSummary, LexiconSources,
    PrepareSummary, ReportInputs, ScoreSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Prepare,
    Deform,
    Generate,
    Score,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Prepare,
        Stage::Deform,
        Stage::Generate,
        Stage::Score,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Prepare => "prepare",
            Stage::Deform => "deform",
            Stage::Generate => "generate",
            Stage::Score => "score",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("required input {} does not exist", .0.display())]
    Missing(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Lexicon { path: PathBuf, source: LexiconError },
    #[error("{}: {source}", path.display())]
    Manifest {
        path: PathBuf,
        source: ManifestError,
    },
    #[error("{source}")]
    Store { path: PathBuf, source: StoreError },
    #[error("{}: {source}", path.display())]
    Scores { path: PathBuf, source: ScoresError },
    #[error("{}: {source}", path.display())]
    Analysis {
        path: PathBuf,
        source: AnalysisError,
    },
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Precondition(String),
}

impl StageError {
    pub fn kind(&self) -> &'static str {
        match self {
            StageError::Missing(_) => "missing_input",
            StageError::Io { .. } => "io",
            StageError::Lexicon { .. } => "lexicon",
            StageError::Manifest { .. } => "manifest",
            StageError::Store { .. } => "store",
            StageError::Scores { .. } => "scores",
            StageError::Analysis { .. } => "analysis",
            StageError::Bridge(BridgeError::BackendUnavailable { .. }) => "backend_unavailable",
            StageError::Bridge(BridgeError::DimensionMismatch { .. }) => "dimension_mismatch",
            StageError::Bridge(_) => "generation",
            StageError::Config(_) => "config",
            StageError::Precondition(_) => "precondition",
        }
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            StageError::Missing(path)
            | StageError::Io { path, .. }
            | StageError::Lexicon { path, .. }
            | StageError::Manifest { path, .. }
            | StageError::Store { path, .. }
            | StageError::Scores { path, .. }
            | StageError::Analysis { path, .. } => Some(path),
            _ => None,
        }
    }

    /// 1-based line of the offending record, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            StageError::Lexicon {
                source: LexiconError::Format { line, .. },
                ..
            }
            | StageError::Manifest {
                source: ManifestError::Format { line, .. },
                ..
            }
            | StageError::Scores {
                source: ScoresError::Format { line, .. },
                ..
            }
            | StageError::Store {
                source: StoreError::CorruptIndex { line, .. },
                ..
            }
            | StageError::Analysis {
                source: AnalysisError::Format { line, .. },
                ..
            } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl PipelineError {
    /// Structured form for machine consumers.
    pub fn record(&self) -> Value {
        json!({
            "stage": self.stage.as_str(),
            "kind": self.source.kind(),
            "message": self.source.to_string(),
            "path": self.source.path().map(|p| p.display().to_string()),
            "line": self.source.line(),
        })
    }
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub ingest: Option<IngestSummary>,
    pub prepare: Option<PrepareSummary>,
    pub deform: Option<DeformStageSummary>,
    pub generate: Option<GenerateSummary>,
    pub score: Option<ScoreSummary>,
    pub report: Option<ReportFiles>,
}

/// Output file names inside `out_dir`.
pub mod files {
    pub const LEXICON: &str = "lexicon.tsv";
    pub const PROMPTS: &str = "prompts.tsv";
    pub const DEFORMED: &str = "deformed.tsv";
    pub const STORE: &str = "images.imgb";
    pub const SCORES: &str = "scores.tsv";
    pub const REPORT: &str = "report";
}

/// Runs configured stages against one output directory. Each stage reads
/// its predecessor's files from disk, so any suffix of stages can be rerun.
pub struct Pipeline {
    config: RunConfig,
    oracle: Arc<SyntheticOracle>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Self {
        let oracle = Arc::new(SyntheticOracle::hashed(config.seed, config.backend.dim));
        Self { config, oracle }
    }

    /// Replaces the mock backend's synthetic generator.
    pub fn with_oracle(mut self, oracle: Arc<SyntheticOracle>) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn header(&self) -> Vec<(String, String)> {
        vec![("config".into(), self.config.to_json())]
    }

    pub fn run(&self, stages: &[Stage]) -> Result<RunSummary, PipelineError> {
        self.config.validate().map_err(|e| PipelineError {
            stage: stages.iter().min().copied().unwrap_or(Stage::Ingest),
            source: StageError::Config(e),
        })?;
        let mut order = stages.to_vec();
        order.sort();
        order.dedup();
        let out_dir = self.config.resolve(&self.config.out_dir);
        std::fs::create_dir_all(&out_dir).map_err(|source| PipelineError {
            stage: order.first().copied().unwrap_or(Stage::Ingest),
            source: StageError::Io {
                path: out_dir.clone(),
                source,
            },
        })?;
        let mut summary = RunSummary::default();
        for stage in order {
            log::info!("stage {stage}");
            self.run_stage(stage, &mut summary)
                .map_err(|source| PipelineError { stage, source })?;
        }
        Ok(summary)
    }

    fn input(&self, path: &Option<PathBuf>) -> Option<PathBuf> {
        path.as_ref().map(|p| self.config.resolve(p))
    }

    fn run_stage(&self, stage: Stage, summary: &mut RunSummary) -> Result<(), StageError> {
        let c = &self.config;
        let header = self.header();
        match stage {
            Stage::Ingest => {
                let sources = LexiconSources {
                    mrc: self.input(&c.inputs.mrc),
                    mrc_layout: self.input(&c.inputs.mrc_layout),
                    mrc_include_all: c.inputs.mrc_include_all,
                    brysbaert: self.input(&c.inputs.brysbaert),
                    lexicon: self.input(&c.inputs.lexicon),
                };
                summary.ingest = Some(stages::ingest(&sources, &c.out(files::LEXICON), &header)?);
            }
            Stage::Prepare => {
                let sources = CorpusSources {
                    poems: self.input(&c.inputs.poems),
                    captions: self.input(&c.inputs.captions),
                    news: self.input(&c.inputs.news),
                };
                let lexicon = c.out(files::LEXICON);
                summary.prepare = Some(stages::prepare(
                    &sources,
                    Some(&lexicon),
                    &c.prepare,
                    c.seed,
                    &c.out(files::PROMPTS),
                    &header,
                )?);
            }
            Stage::Deform => {
                summary.deform = Some(stages::deform(
                    &c.out(files::PROMPTS),
                    &c.out(files::LEXICON),
                    &c.deform.kinds,
                    c.seed,
                    &c.out(files::DEFORMED),
                    &header,
                )?);
            }
            Stage::Generate => {
                summary.generate = Some(stages::generate(
                    &c.out(files::DEFORMED),
                    &c.out(files::STORE),
                    &c.generation,
                    &c.backend,
                    Arc::clone(&self.oracle),
                    &header,
                )?);
            }
            Stage::Score => {
                summary.score = Some(stages::score(
                    &c.out(files::DEFORMED),
                    &c.out(files::STORE),
                    &c.out(files::LEXICON),
                    &c.score,
                    &c.out(files::SCORES),
                    &header,
                )?);
            }
            Stage::Report => {
                let inputs = ReportInputs {
                    scores: vec![c.out(files::SCORES)],
                    ratings: self.input(&c.inputs.ratings),
                    lexicon: Some(c.out(files::LEXICON)),
                    manifest: Some(c.out(files::DEFORMED)),
                };
                summary.report = Some(stages::report(
                    &inputs,
                    &c.report,
                    &c.out(files::REPORT),
                    &header,
                )?);
            }
        }
        Ok(())
    }
}
