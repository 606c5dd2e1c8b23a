//! The six stages as standalone functions over explicit file paths.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::{info, warn};

use super::config::{BackendConfig, PrepareConfig, ReportConfig};
use super::StageError;
use crate::analysis::{emit_report, read_ratings, ReportFiles, ReportOptions};
use crate::corpus::{
    dedup_prompts, filter_captions, pair_poem_lines, read_manifest, sample_news_sentences,
    sample_prompts, split_poems, words_as_prompts, write_manifest, Manifest, Prompt, RuleSplitter,
};
use crate::deformance::{DeformanceKind, Deformer};
use crate::fsio;
use crate::genbridge::{
    load_store, request_images, save_store, BackendSpec, BridgeOptions, GenerationConfig,
    GenerationReport, ImageStore, SyntheticOracle,
};
use crate::lexicon::canonical::{read_lexicon, write_lexicon_annotated};
use crate::lexicon::{
    merge, parse_brysbaert, parse_mrc, FixedWidthLayout, Lexicon, MrcOptions, SourceRecord,
};
use crate::metrics::{
    read_scores, run_header, score_manifest, write_scores, PromptScores, ScoreOptions,
};

pub type Header = [(String, String)];

fn require(path: &Path) -> Result<(), StageError> {
    if path.exists() {
        Ok(())
    } else {
        Err(StageError::Missing(path.to_path_buf()))
    }
}

fn read_text(path: &Path) -> Result<String, StageError> {
    require(path)?;
    std::fs::read_to_string(path).map_err(|source| StageError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, StageError> {
    require(path)?;
    let reader = fsio::open_buffered(path).map_err(|source| StageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_lexicon(reader).map_err(|source| StageError::Lexicon {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_manifest(path: &Path) -> Result<Manifest, StageError> {
    require(path)?;
    let reader = fsio::open_buffered(path).map_err(|source| StageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_manifest(reader).map_err(|source| StageError::Manifest {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<(), StageError> {
    fsio::write_atomic(path, |w| write_manifest(manifest, w)).map_err(|source| {
        StageError::Manifest {
            path: path.to_path_buf(),
            source,
        }
    })
}

pub fn load_scores(path: &Path) -> Result<Vec<PromptScores>, StageError> {
    require(path)?;
    let reader = fsio::open_buffered(path).map_err(|source| StageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_scores(reader)
        .map(|(_, rows)| rows)
        .map_err(|source| StageError::Scores {
            path: path.to_path_buf(),
            source,
        })
}

fn manifest_header(header: &Header, extra: &[(&str, String)]) -> Vec<String> {
    header
        .iter()
        .map(|(k, v)| format!("{k}\t{v}"))
        .chain(extra.iter().map(|(k, v)| format!("{k}\t{v}")))
        .collect()
}

/// `SOURCE_DATE_EPOCH` when set, so rebuilt lexicons can be byte-identical.
fn ingest_time() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

#[derive(Debug, Clone, Default)]
pub struct LexiconSources {
    pub mrc: Option<PathBuf>,
    pub mrc_layout: Option<PathBuf>,
    pub mrc_include_all: bool,
    pub brysbaert: Option<PathBuf>,
    /// Existing canonical lexicon to re-validate and copy.
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSummary {
    pub words: usize,
    pub with_imageability: usize,
    pub malformed: usize,
    pub filtered: usize,
    pub conflicts: usize,
}

/// Parses the raw norms (MRC first, so its values win on conflicts) and
/// writes the merged canonical lexicon to `out`.
pub fn ingest(
    sources: &LexiconSources,
    out: &Path,
    header: &Header,
) -> Result<IngestSummary, StageError> {
    let mut entries = Vec::new();
    let mut records = Vec::new();
    let (mut malformed, mut filtered) = (0, 0);
    let at = ingest_time();
    let open = |path: &Path| {
        require(path)?;
        fsio::open_buffered(path).map_err(|source| StageError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let lexicon_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| StageError::Lexicon { path, source }
    };
    if let Some(path) = &sources.mrc {
        let layout = match &sources.mrc_layout {
            Some(l) => FixedWidthLayout::load(l).map_err(lexicon_err(l))?,
            None => FixedWidthLayout::mrc2(),
        };
        let options = MrcOptions {
            include_all: sources.mrc_include_all,
        };
        let parsed = parse_mrc(open(path)?, &layout, options).map_err(lexicon_err(path))?;
        for issue in parsed.malformed.iter().take(5) {
            warn!("{}:{}: {}", path.display(), issue.line, issue.reason);
        }
        malformed += parsed.malformed.len();
        filtered += parsed.filtered;
        records.push(("mrc", parsed.entries.len()));
        entries.extend(parsed.entries);
    }
    if let Some(path) = &sources.brysbaert {
        let parsed = parse_brysbaert(open(path)?).map_err(lexicon_err(path))?;
        malformed += parsed.malformed.len();
        filtered += parsed.filtered;
        records.push(("brysbaert", parsed.entries.len()));
        entries.extend(parsed.entries);
    }
    let (lexicon, conflicts) = if records.is_empty() {
        let Some(path) = &sources.lexicon else {
            return Err(StageError::Precondition(
                "no lexicon source configured (mrc, brysbaert or a canonical lexicon)".into(),
            ));
        };
        (load_lexicon(path)?, 0)
    } else {
        let merged = merge(entries);
        let mut lexicon = merged.lexicon;
        for (name, count) in records {
            lexicon = lexicon.with_source(SourceRecord {
                name: name.into(),
                records: count,
                ingested_at: at,
            });
        }
        (lexicon, merged.conflicts)
    };
    fsio::write_atomic(out, |w| write_lexicon_annotated(&lexicon, header, w)).map_err(
        |source| StageError::Io {
            path: out.to_path_buf(),
            source,
        },
    )?;
    let summary = IngestSummary {
        words: lexicon.len(),
        with_imageability: lexicon.iter().filter(|e| e.imageability.is_some()).count(),
        malformed,
        filtered,
        conflicts,
    };
    info!("ingest: {summary:?}");
    Ok(summary)
}

#[derive(Debug, Clone, Default)]
pub struct CorpusSources {
    pub poems: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub news: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrepareSummary {
    pub poems: usize,
    pub captions: usize,
    pub news: usize,
    pub news_eligible: usize,
    pub words: usize,
}

/// Splits a news file into articles at blank lines.
fn news_articles(text: &str) -> Vec<String> {
    split_poems(text)
        .into_iter()
        .map(|lines| lines.join(" "))
        .collect()
}

/// Builds the original-prompt manifest from the configured corpora.
pub fn prepare(
    sources: &CorpusSources,
    lexicon: Option<&Path>,
    settings: &PrepareConfig,
    seed: u64,
    out: &Path,
    header: &Header,
) -> Result<PrepareSummary, StageError> {
    let mut prompts: Vec<Prompt> = Vec::new();
    let mut summary = PrepareSummary::default();
    let mut extra = vec![("dedup", "before-sampling".to_string())];
    if let Some(path) = &sources.poems {
        for (i, poem) in split_poems(&read_text(path)?).iter().enumerate() {
            let pairs = pair_poem_lines(&format!("poems-{:04}", i + 1), poem);
            summary.poems += pairs.len();
            prompts.extend(pairs);
        }
    }
    if let Some(path) = &sources.captions {
        let text = read_text(path)?;
        let lines: Vec<&str> = text.lines().collect();
        let kept = dedup_prompts(filter_captions(&lines));
        let sampled = sample_prompts(kept, settings.captions, seed, "captions");
        summary.captions = sampled.len();
        prompts.extend(sampled);
    }
    if let Some(path) = &sources.news {
        let sample = sample_news_sentences(
            &news_articles(&read_text(path)?),
            settings.news,
            seed,
            &RuleSplitter,
        );
        if sample.shortfall {
            warn!(
                "only {} news sentences qualify, {} requested",
                sample.eligible, settings.news
            );
        }
        summary.news = sample.prompts.len();
        summary.news_eligible = sample.eligible;
        extra.push(("news_eligible", sample.eligible.to_string()));
        prompts.extend(sample.prompts);
    }
    if settings.words {
        let path = lexicon
            .ok_or_else(|| StageError::Precondition("word prompts need a lexicon".into()))?;
        let words = words_as_prompts(&load_lexicon(path)?);
        summary.words = words.len();
        prompts.extend(words);
    }
    if prompts.is_empty() {
        return Err(StageError::Precondition(
            "no prompts: configure at least one corpus (poems, captions, news or words)".into(),
        ));
    }
    let manifest = Manifest {
        header: manifest_header(header, &extra),
        prompts,
    };
    save_manifest(&manifest, out)?;
    info!("prepare: {summary:?}");
    Ok(summary)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeformStageSummary {
    pub originals: usize,
    pub deformed: usize,
    pub empty: usize,
    pub replaced: usize,
    pub no_alternative: usize,
}

pub fn deform(
    manifest: &Path,
    lexicon: &Path,
    kinds: &[DeformanceKind],
    seed: u64,
    out: &Path,
    header: &Header,
) -> Result<DeformStageSummary, StageError> {
    let input = load_manifest(manifest)?;
    let lexicon = load_lexicon(lexicon)?;
    let result = Deformer::new(&lexicon, seed).deform_manifest(&input, kinds);
    let summary = DeformStageSummary {
        originals: result.manifest.prompts.len() - result.deformed,
        deformed: result.deformed,
        empty: result.empty,
        replaced: result.replaced,
        no_alternative: result.no_alternative,
    };
    let kinds_text = kinds
        .iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let inherited = input
        .header
        .iter()
        .filter(|l| !l.starts_with("config\t"))
        .cloned();
    let mut out_manifest = result.manifest;
    out_manifest.header = manifest_header(header, &[])
        .into_iter()
        .chain(inherited)
        .chain([
            format!("deformances\t{kinds_text}"),
            format!("empty\t{}", summary.empty),
            format!("no_alternative\t{}", summary.no_alternative),
        ])
        .collect();
    save_manifest(&out_manifest, out)?;
    info!("deform: {summary:?}");
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub requested: usize,
    pub cache_hits: usize,
    pub failed: usize,
    pub rows: usize,
    pub backend_requests: usize,
}

impl GenerateSummary {
    pub fn hit_rate(&self) -> f64 {
        if self.requested == 0 {
            1.0
        } else {
            self.cache_hits as f64 / self.requested as f64
        }
    }
}

/// Fetches images for `manifest` into `store`, reusing rows already in an
/// existing store at that path, and writes `<store>.failures`.
pub fn generate(
    manifest: &Path,
    store: &Path,
    generation: &GenerationConfig,
    backend: &BackendConfig,
    oracle: Arc<SyntheticOracle>,
    header: &Header,
) -> Result<GenerateSummary, StageError> {
    let input = load_manifest(manifest)?;
    let spec: BackendSpec = backend.spec.parse().map_err(StageError::Config)?;
    let cache = if store.exists() {
        Some(load_store(store).map_err(|source| StageError::Store {
            path: store.to_path_buf(),
            source,
        })?)
    } else {
        None
    };
    let mut backend_impl = spec.open(oracle).map_err(|e| {
        StageError::Bridge(crate::genbridge::BridgeError::BackendUnavailable {
            backend: spec.to_string(),
            attempts: 1,
            reason: e.0,
        })
    })?;
    let options = BridgeOptions {
        dim: backend.dim,
        retries: backend.retries,
        backoff: Duration::from_millis(backend.backoff_ms),
        max_in_flight: backend.max_in_flight,
        checkpoint: Some(store.to_path_buf()),
    };
    let report: GenerationReport = request_images(
        &input.prompts,
        generation,
        backend_impl.as_mut(),
        &options,
        cache.as_ref(),
    )?;
    save_store(&report.store, store).map_err(|source| StageError::Store {
        path: store.to_path_buf(),
        source,
    })?;
    let failures_path = failures_path(store);
    fsio::write_atomic(&failures_path, |w| {
        use std::io::Write;
        writeln!(w, "#failures v1")?;
        for (k, v) in header {
            writeln!(w, "#{k}\t{v}")?;
        }
        for f in &report.failures {
            writeln!(w, "{}\t{}", f.prompt_id, f.reason)?;
        }
        Ok::<(), std::io::Error>(())
    })
    .map_err(|source| StageError::Io {
        path: failures_path.clone(),
        source,
    })?;
    let summary = GenerateSummary {
        requested: report.requested,
        cache_hits: report.cache_hits,
        failed: report.failures.len(),
        rows: report.store.rows(),
        backend_requests: report.backend_requests,
    };
    info!(
        "generate: {} prompts, {} cache hits ({:.1}%), {} failed, {} rows",
        summary.requested,
        summary.cache_hits,
        100.0 * summary.hit_rate(),
        summary.failed,
        summary.rows
    );
    Ok(summary)
}

pub fn failures_path(store: &Path) -> PathBuf {
    let mut name = store.as_os_str().to_owned();
    name.push(".failures");
    PathBuf::from(name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreSummary {
    pub prompts: usize,
    pub with_images: usize,
    pub missing: usize,
}

pub fn score(
    manifest: &Path,
    store: &Path,
    lexicon: &Path,
    options: &ScoreOptions,
    out: &Path,
    header: &Header,
) -> Result<ScoreSummary, StageError> {
    let manifest = load_manifest(manifest)?;
    require(store)?;
    let images: ImageStore = load_store(store).map_err(|source| StageError::Store {
        path: store.to_path_buf(),
        source,
    })?;
    let lexicon = load_lexicon(lexicon)?;
    let run = score_manifest(&manifest, &images, &lexicon, options);
    let mut lines: Vec<(String, String)> = header.to_vec();
    lines.extend(run_header(&run));
    lines.push((
        "missing_images".into(),
        run.coverage.missing.len().to_string(),
    ));
    lines.push((
        "empty_prompts".into(),
        run.coverage.empty_prompts.to_string(),
    ));
    fsio::write_atomic(out, |w| write_scores(&run.scores, &lines, w)).map_err(|source| {
        StageError::Io {
            path: out.to_path_buf(),
            source,
        }
    })?;
    Ok(ScoreSummary {
        prompts: run.coverage.prompts,
        with_images: run.coverage.with_images,
        missing: run.coverage.missing.len(),
    })
}

#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub scores: Vec<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// Manifest with prompt texts, for the word-frequency control.
    pub manifest: Option<PathBuf>,
}

pub fn report(
    inputs: &ReportInputs,
    settings: &ReportConfig,
    out_dir: &Path,
    header: &Header,
) -> Result<ReportFiles, StageError> {
    let mut scores = Vec::new();
    for path in &inputs.scores {
        scores.extend(load_scores(path)?);
    }
    let ratings = match &inputs.ratings {
        Some(path) => {
            require(path)?;
            let reader = fsio::open_buffered(path).map_err(|source| StageError::Io {
                path: path.clone(),
                source,
            })?;
            Some(read_ratings(reader).map_err(|source| StageError::Analysis {
                path: path.clone(),
                source,
            })?)
        }
        None => None,
    };
    let lexicon = inputs.lexicon.as_deref().map(load_lexicon).transpose()?;
    let texts: Option<HashMap<String, String>> = inputs
        .manifest
        .as_deref()
        .map(load_manifest)
        .transpose()?
        .map(|m| m.prompts.into_iter().map(|p| (p.id, p.text)).collect());
    let options = ReportOptions {
        q: settings.q,
        aggregation: settings.aggregation,
        svg: settings.svg,
        ratings: ratings.as_deref(),
        lexicon: lexicon.as_ref(),
        texts: texts.as_ref(),
        header: header.to_vec(),
    };
    let files = emit_report(&scores, &options, out_dir).map_err(|source| StageError::Analysis {
        path: out_dir.to_path_buf(),
        source,
    })?;
    for s in &files.skipped {
        info!("{s}");
    }
    Ok(files)
}
