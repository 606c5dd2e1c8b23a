//! Evaluation over score tables: correlations, percent change under
//! deformance, top/bottom quantile behaviour and corpus averages.

mod report;
mod stats;
pub mod svg;

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{emit_report, read_csv, ReportFiles, ReportOptions};
pub use stats::{mean, pearson, pearson_pairwise, percent_change, Correlation, EPSILON};

use crate::corpus::{words, Corpus, Deformance};
use crate::lexicon::Lexicon;
use crate::metrics::{Measure, PromptScores};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("too few rows: need {need}, have {have}")]
    TooFewRows { need: usize, have: usize },
    #[error("no rows join the ratings file")]
    NoOverlap,
    #[error("ratings line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// How per-pair changes are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean of per-pair percent changes.
    #[default]
    MeanOfPairs,
    /// Percent change between the mean original and mean deformed score
    /// over the usable pairs.
    ChangeOfMeans,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::MeanOfPairs => "mean_of_pairs",
            Aggregation::ChangeOfMeans => "change_of_means",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRow {
    pub corpus: Corpus,
    pub deformance: Deformance,
    pub measure: Measure,
    pub mean_percent_change: Option<f64>,
    pub n_pairs: usize,
    pub n_skipped_zero_base: usize,
    pub n_skipped_absent: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentChangeReport {
    pub rows: Vec<ChangeRow>,
    /// Deformed rows whose origin is not in the table.
    pub unmatched: usize,
}

impl PercentChangeReport {
    pub fn get(
        &self,
        corpus: Corpus,
        deformance: Deformance,
        measure: Measure,
    ) -> Option<&ChangeRow> {
        self.rows
            .iter()
            .find(|r| r.corpus == corpus && r.deformance == deformance && r.measure == measure)
    }
}

#[derive(Default)]
struct PairAccumulator {
    changes: Vec<f64>,
    originals: Vec<f64>,
    deformed: Vec<f64>,
    zero_base: usize,
    absent: usize,
}

impl PairAccumulator {
    fn add(&mut self, original: Option<f64>, deformed: Option<f64>) {
        match (original, deformed) {
            (Some(o), Some(d)) => match percent_change(o, d) {
                Some(pc) => {
                    self.changes.push(pc);
                    self.originals.push(o);
                    self.deformed.push(d);
                }
                None => self.zero_base += 1,
            },
            _ => self.absent += 1,
        }
    }

    fn result(&self, aggregation: Aggregation) -> Option<f64> {
        match aggregation {
            Aggregation::MeanOfPairs => mean(&self.changes),
            Aggregation::ChangeOfMeans => {
                percent_change(mean(&self.originals)?, mean(&self.deformed)?)
            }
        }
    }
}

/// Percent change of every measure between each deformed row and its
/// original, per (corpus, deformance, measure).
pub fn deformance_table(scores: &[PromptScores], aggregation: Aggregation) -> PercentChangeReport {
    let originals: HashMap<&str, &PromptScores> = scores
        .iter()
        .filter(|s| s.is_original())
        .map(|s| (s.prompt_id.as_str(), s))
        .collect();
    let mut groups: BTreeMap<(Corpus, Deformance, Measure), PairAccumulator> = BTreeMap::new();
    let mut unmatched = 0;
    for s in scores.iter().filter(|s| !s.is_original()) {
        let Some(o) = originals.get(s.origin_id.as_str()) else {
            unmatched += 1;
            continue;
        };
        for m in Measure::ALL {
            groups
                .entry((o.corpus, s.deformance, m))
                .or_default()
                .add(o.get(m), s.get(m));
        }
    }
    PercentChangeReport {
        rows: groups
            .into_iter()
            .map(|((corpus, deformance, measure), acc)| ChangeRow {
                corpus,
                deformance,
                measure,
                mean_percent_change: acc.result(aggregation),
                n_pairs: acc.changes.len(),
                n_skipped_zero_base: acc.zero_base,
                n_skipped_absent: acc.absent,
            })
            .collect(),
        unmatched,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Bottom,
    Top,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    pub corpus: Corpus,
    pub measure: Measure,
    pub group: Group,
    pub deformance: Deformance,
    pub mean_percent_change: Option<f64>,
    pub n_pairs: usize,
    pub n_skipped_zero_base: usize,
    pub n_skipped_absent: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecileReport {
    pub q: f64,
    pub bottom: Vec<String>,
    pub top: Vec<String>,
    pub rows: Vec<DecileRow>,
}

pub const MIN_DECILE_ROWS: usize = 10;

/// Top and bottom `q` quantiles of the originals in `scores` by `measure`
/// (nearest rank, ties kept in input order so they fall in the lower
/// group), and the mean percent change of that measure per deformance for
/// each group.
pub fn decile_analysis(
    scores: &[PromptScores],
    measure: Measure,
    q: f64,
) -> Result<DecileReport, AnalysisError> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(AnalysisError::DegenerateInput(format!(
            "q = {q} outside (0, 0.5]"
        )));
    }
    let mut ranked: Vec<(f64, &PromptScores)> = scores
        .iter()
        .filter(|s| s.is_original())
        .filter_map(|s| Some((s.get(measure)?, s)))
        .collect();
    let n = ranked.len();
    if n < MIN_DECILE_ROWS {
        return Err(AnalysisError::TooFewRows {
            need: MIN_DECILE_ROWS,
            have: n,
        });
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let size = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let bottom_size = size.min(n);
    let top_size = size.min(n - bottom_size);
    let bottom: Vec<&PromptScores> = ranked[..bottom_size].iter().map(|(_, s)| *s).collect();
    let top: Vec<&PromptScores> = ranked[n - top_size..].iter().map(|(_, s)| *s).collect();

    let mut deformed: HashMap<&str, Vec<&PromptScores>> = HashMap::new();
    for s in scores.iter().filter(|s| !s.is_original()) {
        deformed.entry(s.origin_id.as_str()).or_default().push(s);
    }
    let mut rows = Vec::new();
    for (group, members) in [(Group::Bottom, &bottom), (Group::Top, &top)] {
        let mut per: BTreeMap<(Corpus, Deformance), PairAccumulator> = BTreeMap::new();
        for o in members.iter() {
            for d in deformed.get(o.prompt_id.as_str()).into_iter().flatten() {
                per.entry((o.corpus, d.deformance))
                    .or_default()
                    .add(o.get(measure), d.get(measure));
            }
        }
        rows.extend(
            per.into_iter()
                .map(|((corpus, deformance), acc)| DecileRow {
                    corpus,
                    measure,
                    group,
                    deformance,
                    mean_percent_change: acc.result(Aggregation::MeanOfPairs),
                    n_pairs: acc.changes.len(),
                    n_skipped_zero_base: acc.zero_base,
                    n_skipped_absent: acc.absent,
                }),
        );
    }
    Ok(DecileReport {
        q,
        bottom: bottom.iter().map(|s| s.prompt_id.clone()).collect(),
        top: top.iter().map(|s| s.prompt_id.clone()).collect(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusAverage {
    pub corpus: Corpus,
    pub prompts: usize,
    pub imag_bow: Option<f64>,
    pub n_imag: usize,
    pub conc_bow: Option<f64>,
    pub n_conc: usize,
}

/// Mean `imag_bow` and `conc_bow` over the original prompts of each corpus
/// present in `scores`.
pub fn corpus_averages(scores: &[PromptScores]) -> Vec<CorpusAverage> {
    let mut by: BTreeMap<Corpus, Vec<&PromptScores>> = BTreeMap::new();
    for s in scores.iter().filter(|s| s.is_original()) {
        by.entry(s.corpus).or_default().push(s);
    }
    by.into_iter()
        .map(|(corpus, rows)| {
            let imag: Vec<f64> = rows.iter().filter_map(|s| s.imag_bow).collect();
            let conc: Vec<f64> = rows.iter().filter_map(|s| s.conc_bow).collect();
            CorpusAverage {
                corpus,
                prompts: rows.len(),
                imag_bow: mean(&imag),
                n_imag: imag.len(),
                conc_bow: mean(&conc),
                n_conc: conc.len(),
            }
        })
        .collect()
}

pub const RATINGS_HEADER: &str = "#ratings v1";

/// Reads `key<TAB>rating` lines after a `#ratings v1` header.
pub fn read_ratings<R: BufRead>(reader: R) -> Result<Vec<(String, f64)>, AnalysisError> {
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(first) if first.trim_end() == RATINGS_HEADER => {}
        _ => {
            return Err(AnalysisError::Format {
                line: 1,
                reason: format!("missing `{RATINGS_HEADER}` header"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| AnalysisError::Format {
            line: i + 2,
            reason,
        };
        let (key, value) = line
            .split_once('\t')
            .ok_or_else(|| err("expected key<TAB>rating".into()))?;
        let rating: f64 = value
            .trim()
            .parse()
            .map_err(|_| err(format!("bad rating `{value}`")))?;
        if !rating.is_finite() {
            return Err(err(format!("non-finite rating `{value}`")));
        }
        out.push((key.to_string(), rating));
    }
    Ok(out)
}

/// Mean Brown frequency over the words of a prompt found in the lexicon.
fn word_frequency(text: &str, lexicon: &Lexicon) -> Option<f64> {
    let freqs: Vec<f64> = words(text)
        .iter()
        .filter_map(|w| lexicon.lookup(w, true)?.brown_freq)
        .map(f64::from)
        .collect();
    mean(&freqs)
}

/// Correlates every measure with external ratings keyed by prompt id or by
/// word (`w:<word>` prompts). With a lexicon, adds the word-frequency
/// control.
pub fn correlate_with_ratings(
    scores: &[PromptScores],
    ratings: &[(String, f64)],
    texts: Option<(&HashMap<String, String>, &Lexicon)>,
) -> Result<Vec<Correlation>, AnalysisError> {
    let by_id: HashMap<&str, &PromptScores> =
        scores.iter().map(|s| (s.prompt_id.as_str(), s)).collect();
    let joined: Vec<(&PromptScores, f64)> = ratings
        .iter()
        .filter_map(|(key, r)| {
            by_id
                .get(key.as_str())
                .or_else(|| by_id.get(format!("w:{key}").as_str()))
                .map(|s| (*s, *r))
        })
        .collect();
    if joined.is_empty() {
        return Err(AnalysisError::NoOverlap);
    }
    let y: Vec<Option<f64>> = joined.iter().map(|(_, r)| Some(*r)).collect();
    let mut out: Vec<Correlation> = Measure::ALL
        .iter()
        .map(|m| {
            let x: Vec<Option<f64>> = joined.iter().map(|(s, _)| s.get(*m)).collect();
            pearson_pairwise(m.as_str(), "rating", &x, &y)
        })
        .collect();
    if let Some((texts, lexicon)) = texts {
        let x: Vec<Option<f64>> = joined
            .iter()
            .map(|(s, _)| word_frequency(texts.get(&s.prompt_id)?, lexicon))
            .collect();
        out.push(pearson_pairwise("word_frequency", "rating", &x, &y));
    }
    Ok(out)
}

/// Word-level correlations against MRC imageability: Brown frequency, both
/// concreteness norms, and the image measures of each `w:` prompt.
pub fn correlate_with_lexicon(scores: &[PromptScores], lexicon: &Lexicon) -> Vec<Correlation> {
    let rows: Vec<(&PromptScores, &crate::lexicon::LexiconEntry)> = scores
        .iter()
        .filter(|s| s.corpus == Corpus::MrcWords && s.is_original())
        .filter_map(|s| Some((s, lexicon.get(s.prompt_id.strip_prefix("w:")?)?)))
        .collect();
    let y: Vec<Option<f64>> = rows
        .iter()
        .map(|(_, e)| e.imageability.map(f64::from))
        .collect();
    type Field = fn(&crate::lexicon::LexiconEntry) -> Option<f64>;
    let lexical: [(&str, Field); 3] = [
        ("word_frequency", |e| e.brown_freq.map(f64::from)),
        ("concreteness_mrc", |e| e.concreteness_mrc.map(f64::from)),
        ("concreteness_brysbaert", |e| e.concreteness_brysbaert),
    ];
    let mut out: Vec<Correlation> = lexical
        .iter()
        .map(|(name, f)| {
            let x: Vec<Option<f64>> = rows.iter().map(|(_, e)| f(e)).collect();
            pearson_pairwise(name, "mrc_imageability", &x, &y)
        })
        .collect();
    for m in [Measure::Hessel, Measure::AveClip, Measure::ImgSim] {
        let x: Vec<Option<f64>> = rows.iter().map(|(s, _)| s.get(m)).collect();
        out.push(pearson_pairwise(m.as_str(), "mrc_imageability", &x, &y));
    }
    out
}
