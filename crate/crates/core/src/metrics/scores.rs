//! Scoring a whole manifest and the scores file format.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    ave_clip, bow_concreteness, bow_imageability, hessel_sentence, img_sim, NeighborIndex,
    WordScores,
};
use crate::corpus::{words, Corpus, Deformance, Manifest, Prompt};
use crate::genbridge::ImageStore;
use crate::lexicon::Lexicon;

pub const SCORES_HEADER: &str = "#scores v1";

pub const SCORE_COLUMNS: [&str; 15] = [
    "prompt_id",
    "corpus",
    "deformance",
    "origin_id",
    "imag_bow",
    "conc_bow",
    "hessel_sentence",
    "ave_clip",
    "img_sim",
    "words_total",
    "found_imag",
    "found_conc",
    "found_hessel",
    "images",
    "zero_norm",
];

/// The five measurements a prompt can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    ImagBow,
    ConcBow,
    #[serde(rename = "hessel_sentence")]
    Hessel,
    AveClip,
    ImgSim,
}

impl Measure {
    pub const ALL: [Measure; 5] = [
        Measure::ImagBow,
        Measure::ConcBow,
        Measure::Hessel,
        Measure::AveClip,
        Measure::ImgSim,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::ImagBow => "imag_bow",
            Measure::ConcBow => "conc_bow",
            Measure::Hessel => "hessel_sentence",
            Measure::AveClip => "ave_clip",
            Measure::ImgSim => "img_sim",
        }
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL
            .into_iter()
            .find(|m| m.as_str() == s || (s == "hessel" && *m == Measure::Hessel))
            .ok_or_else(|| format!("unknown measure `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptScores {
    pub prompt_id: String,
    pub corpus: Corpus,
    pub deformance: Deformance,
    pub origin_id: String,
    pub imag_bow: Option<f64>,
    pub conc_bow: Option<f64>,
    pub hessel_sentence: Option<f64>,
    pub ave_clip: Option<f64>,
    pub img_sim: Option<f64>,
    pub words_total: usize,
    pub found_imag: usize,
    pub found_conc: usize,
    pub found_hessel: usize,
    /// Stored images for the prompt.
    pub images: usize,
    /// Images left out of similarity for having a zero embedding.
    pub zero_norm: usize,
}

impl PromptScores {
    pub fn get(&self, measure: Measure) -> Option<f64> {
        match measure {
            Measure::ImagBow => self.imag_bow,
            Measure::ConcBow => self.conc_bow,
            Measure::Hessel => self.hessel_sentence,
            Measure::AveClip => self.ave_clip,
            Measure::ImgSim => self.img_sim,
        }
    }

    pub fn is_original(&self) -> bool {
        self.deformance.is_original()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreOptions {
    pub k_nn: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self { k_nn: 50 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Coverage {
    pub prompts: usize,
    pub with_images: usize,
    /// Prompts with text but no stored images.
    pub missing: Vec<String>,
    pub empty_prompts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolSummary {
    pub corpus: Corpus,
    pub deformance: Deformance,
    pub images: usize,
    pub words_scored: usize,
}

#[derive(Debug, Clone)]
pub struct ScoreRun {
    pub scores: Vec<PromptScores>,
    pub coverage: Coverage,
    pub pools: Vec<PoolSummary>,
    pub options: ScoreOptions,
}

type PoolKey = (Corpus, Deformance);

/// Word scores for one (corpus, deformance) pool of images.
fn pool_word_scores(prompts: &[&Prompt], store: &ImageStore, k_nn: usize) -> (WordScores, usize) {
    let mut rows: Vec<&[f32]> = Vec::new();
    let mut assoc: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for p in prompts {
        let Some(range) = store.row_range(&p.id) else {
            continue;
        };
        let mine: Vec<usize> = range
            .map(|r| store.embedding(r))
            .filter(|e| e.iter().any(|&x| x != 0.0))
            .map(|e| {
                rows.push(e);
                rows.len() - 1
            })
            .collect();
        let distinct: BTreeSet<String> = words(&p.text).into_iter().collect();
        for w in distinct {
            assoc.entry(w).or_default().extend(&mine);
        }
    }
    let images = rows.len();
    if images < 2 {
        return (WordScores::new(), images);
    }
    let index = NeighborIndex::build(&rows, k_nn);
    (index.score_words(&assoc), images)
}

fn score_prompt(
    p: &Prompt,
    store: &ImageStore,
    lexicon: &Lexicon,
    hessel: Option<&WordScores>,
) -> PromptScores {
    let imag = bow_imageability(&p.text, lexicon);
    let conc = bow_concreteness(&p.text, lexicon);
    let clips = store.clip_scores(&p.id);
    let sim = img_sim(&store.embeddings(&p.id));
    let (hessel_value, found_hessel) = match hessel {
        Some(scores) => hessel_sentence(&p.text, scores),
        None => (None, 0),
    };
    PromptScores {
        prompt_id: p.id.clone(),
        corpus: p.corpus,
        deformance: p.deformance,
        origin_id: p.origin_id.clone(),
        imag_bow: imag.value,
        conc_bow: conc.value,
        hessel_sentence: hessel_value,
        ave_clip: ave_clip(clips),
        img_sim: sim.value,
        words_total: imag.total,
        found_imag: imag.found,
        found_conc: conc.found,
        found_hessel,
        images: clips.len(),
        zero_norm: sim.zero_norm,
    }
}

/// Scores every prompt of `manifest`. Hessel word scores are computed per
/// (corpus, deformance) pool; a pool without images yields no Hessel score.
pub fn score_manifest(
    manifest: &Manifest,
    store: &ImageStore,
    lexicon: &Lexicon,
    options: &ScoreOptions,
) -> ScoreRun {
    let mut pools: BTreeMap<PoolKey, Vec<&Prompt>> = BTreeMap::new();
    for p in &manifest.prompts {
        pools.entry((p.corpus, p.deformance)).or_default().push(p);
    }
    let pooled: BTreeMap<PoolKey, (WordScores, usize)> = pools
        .par_iter()
        .map(|(key, prompts)| (*key, pool_word_scores(prompts, store, options.k_nn)))
        .collect();
    let scores: Vec<PromptScores> = manifest
        .prompts
        .par_iter()
        .map(|p| {
            let hessel = pooled
                .get(&(p.corpus, p.deformance))
                .filter(|(_, images)| *images >= 2)
                .map(|(s, _)| s);
            score_prompt(p, store, lexicon, hessel)
        })
        .collect();

    let mut coverage = Coverage {
        prompts: scores.len(),
        ..Coverage::default()
    };
    for (p, s) in manifest.prompts.iter().zip(&scores) {
        if p.text.trim().is_empty() {
            coverage.empty_prompts += 1;
        } else if s.images > 0 {
            coverage.with_images += 1;
        } else {
            coverage.missing.push(p.id.clone());
        }
    }
    if !coverage.missing.is_empty() {
        warn!("{} prompts have no stored images", coverage.missing.len());
    }
    info!(
        "scored {} prompts, {} with images, {} pools",
        coverage.prompts,
        coverage.with_images,
        pooled.len()
    );
    ScoreRun {
        scores,
        coverage,
        pools: pooled
            .iter()
            .map(|((corpus, deformance), (words, images))| PoolSummary {
                corpus: *corpus,
                deformance: *deformance,
                images: *images,
                words_scored: words.len(),
            })
            .collect(),
        options: options.clone(),
    }
}

#[derive(Debug, Error)]
pub enum ScoresError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("scores line {line}: {reason}")]
    Format { line: usize, reason: String },
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the scores table. `header` lines are emitted as `#key<TAB>value`
/// after the format line.
pub fn write_scores<W: Write>(
    scores: &[PromptScores],
    header: &[(String, String)],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{SCORES_HEADER}")?;
    for (k, v) in header {
        writeln!(out, "#{k}\t{v}")?;
    }
    writeln!(out, "{}", SCORE_COLUMNS.join("\t"))?;
    for s in scores {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.prompt_id,
            s.corpus,
            s.deformance,
            s.origin_id,
            opt(s.imag_bow),
            opt(s.conc_bow),
            opt(s.hessel_sentence),
            opt(s.ave_clip),
            opt(s.img_sim),
            s.words_total,
            s.found_imag,
            s.found_conc,
            s.found_hessel,
            s.images,
            s.zero_norm,
        )?;
    }
    Ok(())
}

/// Standard header for a score run: neighbourhood size and pooling key.
pub fn run_header(run: &ScoreRun) -> Vec<(String, String)> {
    vec![
        ("k_nn".into(), run.options.k_nn.to_string()),
        ("hessel_pool".into(), "corpus+deformance".into()),
    ]
}

pub type ScoresFile = (Vec<(String, String)>, Vec<PromptScores>);

pub fn read_scores<R: BufRead>(reader: R) -> Result<ScoresFile, ScoresError> {
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(first) if first.trim_end() == SCORES_HEADER => {}
        _ => {
            return Err(ScoresError::Format {
                line: 1,
                reason: format!("missing `{SCORES_HEADER}` header"),
            })
        }
    }
    let mut header = Vec::new();
    let mut scores = Vec::new();
    let mut seen_columns = false;
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        let err = |reason: String| ScoresError::Format {
            line: line_no,
            reason,
        };
        let line = line.trim_end_matches('\r');
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest.split_once('\t').unwrap_or((rest, ""));
            header.push((k.to_string(), v.to_string()));
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if !seen_columns {
            if line != SCORE_COLUMNS.join("\t") {
                return Err(err("unexpected column header".into()));
            }
            seen_columns = true;
            continue;
        }
        scores.push(parse_row(line).map_err(err)?);
    }
    Ok((header, scores))
}

fn parse_row(line: &str) -> Result<PromptScores, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != SCORE_COLUMNS.len() {
        return Err(format!(
            "expected {} fields, found {}",
            SCORE_COLUMNS.len(),
            f.len()
        ));
    }
    let real = |i: usize| -> Result<Option<f64>, String> {
        if f[i].is_empty() {
            Ok(None)
        } else {
            f[i].parse()
                .map(Some)
                .map_err(|_| format!("{}: bad number `{}`", SCORE_COLUMNS[i], f[i]))
        }
    };
    let count = |i: usize| -> Result<usize, String> {
        f[i].parse()
            .map_err(|_| format!("{}: bad count `{}`", SCORE_COLUMNS[i], f[i]))
    };
    Ok(PromptScores {
        prompt_id: f[0].to_string(),
        corpus: f[1].parse()?,
        deformance: f[2].parse()?,
        origin_id: f[3].to_string(),
        imag_bow: real(4)?,
        conc_bow: real(5)?,
        hessel_sentence: real(6)?,
        ave_clip: real(7)?,
        img_sim: real(8)?,
        words_total: count(9)?,
        found_imag: count(10)?,
        found_conc: count(11)?,
        found_hessel: count(12)?,
        images: count(13)?,
        zero_norm: count(14)?,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::genbridge::{
        request_images, BridgeOptions, GenerationConfig, MockBackend, SyntheticOracle,
    };
    use crate::lexicon::{merge, LexiconEntry};

    fn fixture() -> (Manifest, ImageStore, Lexicon) {
        let prompts = vec![
            Prompt::original("a", Corpus::Captions, "a dog on a box"),
            Prompt::original("b", Corpus::Captions, "an idea of a dog"),
            Prompt::original("c", Corpus::Captions, "a box"),
        ];
        let manifest = Manifest::new(prompts);
        let lexicon = merge([
            LexiconEntry::new("dog")
                .with_imageability(600)
                .with_brysbaert(4.8),
            LexiconEntry::new("box")
                .with_imageability(560)
                .with_brysbaert(4.9),
            LexiconEntry::new("idea")
                .with_imageability(300)
                .with_brysbaert(1.6),
        ])
        .lexicon;
        let mut backend = MockBackend::new(Arc::new(SyntheticOracle::hashed(1, 8)));
        let options = BridgeOptions {
            dim: 8,
            ..BridgeOptions::default()
        };
        let config = GenerationConfig {
            n_images: 4,
            ..GenerationConfig::default()
        };
        let store = request_images(
            &manifest.prompts[..2],
            &config,
            &mut backend,
            &options,
            None,
        )
        .unwrap()
        .store;
        (manifest, store, lexicon)
    }

    #[test]
    fn partial_store_flags_missing() {
        let (manifest, store, lexicon) = fixture();
        let run = score_manifest(&manifest, &store, &lexicon, &ScoreOptions { k_nn: 3 });
        assert_eq!(run.scores.len(), 3);
        assert_eq!(run.coverage.missing, ["c"]);
        let c = &run.scores[2];
        assert_eq!((c.ave_clip, c.img_sim), (None, None));
        assert_eq!(c.imag_bow, Some(560.0));
        assert!(run.scores[0].img_sim.is_some());
        assert!(run.scores[0].hessel_sentence.is_some());
        assert_eq!(run.pools[0].images, 8);
    }

    #[test]
    fn scores_file_round_trips_and_is_deterministic() {
        let (manifest, store, lexicon) = fixture();
        let run = score_manifest(&manifest, &store, &lexicon, &ScoreOptions::default());
        let write = |run: &ScoreRun| {
            let mut buf = Vec::new();
            write_scores(&run.scores, &run_header(run), &mut buf).unwrap();
            buf
        };
        let bytes = write(&run);
        assert_eq!(
            bytes,
            write(&score_manifest(
                &manifest,
                &store,
                &lexicon,
                &ScoreOptions::default()
            ))
        );
        let (header, back) = read_scores(bytes.as_slice()).unwrap();
        assert_eq!(back, run.scores);
        assert_eq!(header[0], ("k_nn".to_string(), "50".to_string()));
    }

    #[test]
    fn rejects_malformed_rows() {
        let text = format!(
            "{SCORES_HEADER}\n{}\na\tcaptions\toriginal\ta\tx\n",
            SCORE_COLUMNS.join("\t")
        );
        assert!(matches!(
            read_scores(text.as_bytes()),
            Err(ScoresError::Format { line: 3, .. })
        ));
        assert!(read_scores("nope\n".as_bytes()).is_err());
    }

    #[test]
    fn measure_names() {
        for m in Measure::ALL {
            assert_eq!(m.as_str().parse::<Measure>().unwrap(), m);
        }
        assert_eq!("hessel".parse::<Measure>().unwrap(), Measure::Hessel);
    }
}
