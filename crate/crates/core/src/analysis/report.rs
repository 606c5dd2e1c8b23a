//! Writes the evaluation tables as CSV and optional SVG scatter plots.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::svg::{Scatter, Series};
use super::{
    corpus_averages, correlate_with_lexicon, correlate_with_ratings, decile_analysis,
    deformance_table, percent_change, Aggregation, AnalysisError, Correlation,
};
use crate::corpus::{Corpus, Deformance};
use crate::fsio;
use crate::lexicon::Lexicon;
use crate::metrics::{Measure, PromptScores};

#[derive(Debug, Clone)]
pub struct ReportOptions<'a> {
    pub q: f64,
    pub aggregation: Aggregation,
    pub svg: bool,
    pub ratings: Option<&'a [(String, f64)]>,
    pub lexicon: Option<&'a Lexicon>,
    /// Prompt texts by id, for the word-frequency control.
    pub texts: Option<&'a HashMap<String, String>>,
    /// Provenance written as `#key<TAB>value` comment lines atop every CSV.
    pub header: Vec<(String, String)>,
}

impl Default for ReportOptions<'_> {
    fn default() -> Self {
        Self {
            q: 0.10,
            aggregation: Aggregation::MeanOfPairs,
            svg: false,
            ratings: None,
            lexicon: None,
            texts: None,
            header: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportFiles {
    pub written: Vec<PathBuf>,
    /// Corpus/measure combinations left out of the quantile table, with why.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub corpus: Corpus,
    pub deformance: Deformance,
    pub prompts: usize,
    pub with_images: usize,
    pub without_images: usize,
    pub empty: usize,
}

fn counts(scores: &[PromptScores]) -> Vec<CountRow> {
    let mut by: BTreeMap<(Corpus, Deformance), CountRow> = BTreeMap::new();
    for s in scores {
        let row = by.entry((s.corpus, s.deformance)).or_insert(CountRow {
            corpus: s.corpus,
            deformance: s.deformance,
            prompts: 0,
            with_images: 0,
            without_images: 0,
            empty: 0,
        });
        row.prompts += 1;
        if s.words_total == 0 && s.images == 0 {
            row.empty += 1;
        } else if s.images > 0 {
            row.with_images += 1;
        } else {
            row.without_images += 1;
        }
    }
    by.into_values().collect()
}

fn write_csv<T: Serialize>(
    dir: &Path,
    name: &str,
    header: &[(String, String)],
    rows: &[T],
    files: &mut ReportFiles,
) -> Result<(), AnalysisError> {
    let mut buf = Vec::new();
    for (k, v) in header {
        writeln!(buf, "#{k}\t{v}")?;
    }
    {
        let mut w = csv::WriterBuilder::new()
            .has_headers(true)
            .from_writer(&mut buf);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    if rows.is_empty() {
        warn!("{name}: no rows");
    }
    let path = dir.join(name);
    fsio::write_atomic::<AnalysisError, _>(&path, |out| Ok(out.write_all(&buf)?))?;
    files.written.push(path);
    Ok(())
}

/// Reads a report CSV back, skipping `#` provenance lines.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, AnalysisError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(fsio::open_buffered(path)?);
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(AnalysisError::from)
}

fn write_svg(
    dir: &Path,
    name: &str,
    plot: &Scatter,
    files: &mut ReportFiles,
) -> Result<(), AnalysisError> {
    let path = dir.join(name);
    let text = plot.render();
    fsio::write_atomic::<AnalysisError, _>(&path, |out| Ok(out.write_all(text.as_bytes())?))?;
    files.written.push(path);
    Ok(())
}

/// Writes every table the inputs support into `dir`:
/// `counts.csv`, `corpus_averages.csv`, `deformance_table.csv`,
/// `deciles.csv`, and `correlations.csv` when ratings or word prompts are
/// available. Output is deterministic for identical inputs.
pub fn emit_report(
    scores: &[PromptScores],
    options: &ReportOptions<'_>,
    dir: &Path,
) -> Result<ReportFiles, AnalysisError> {
    std::fs::create_dir_all(dir)?;
    let mut files = ReportFiles::default();
    let header = &options.header;

    write_csv(dir, "counts.csv", header, &counts(scores), &mut files)?;
    write_csv(
        dir,
        "corpus_averages.csv",
        header,
        &corpus_averages(scores),
        &mut files,
    )?;
    let table = deformance_table(scores, options.aggregation);
    if table.unmatched > 0 {
        warn!("{} deformed rows have no original", table.unmatched);
    }
    let mut table_header = header.clone();
    table_header.push(("aggregation".into(), options.aggregation.as_str().into()));
    table_header.push(("unmatched".into(), table.unmatched.to_string()));
    write_csv(
        dir,
        "deformance_table.csv",
        &table_header,
        &table.rows,
        &mut files,
    )?;

    let mut by_corpus: BTreeMap<Corpus, Vec<PromptScores>> = BTreeMap::new();
    for s in scores {
        by_corpus.entry(s.corpus).or_default().push(s.clone());
    }
    let mut decile_rows = Vec::new();
    for (corpus, rows) in &by_corpus {
        for m in Measure::ALL {
            match decile_analysis(rows, m, options.q) {
                Ok(r) => decile_rows.extend(r.rows),
                Err(e) => files.skipped.push(format!("deciles {corpus}/{m}: {e}")),
            }
        }
    }
    let mut decile_header = header.clone();
    decile_header.push(("q".into(), options.q.to_string()));
    write_csv(dir, "deciles.csv", &decile_header, &decile_rows, &mut files)?;

    let mut correlations: Vec<Correlation> = Vec::new();
    if let Some(ratings) = options.ratings {
        let texts = options.texts.zip(options.lexicon);
        correlations.extend(correlate_with_ratings(scores, ratings, texts)?);
    }
    if let Some(lexicon) = options.lexicon {
        if scores.iter().any(|s| s.corpus == Corpus::MrcWords) {
            correlations.extend(correlate_with_lexicon(scores, lexicon));
        }
    }
    if !correlations.is_empty() {
        write_csv(dir, "correlations.csv", header, &correlations, &mut files)?;
    }

    if options.svg {
        plots(scores, options, dir, &mut files)?;
    }
    info!("report: {} files in {}", files.written.len(), dir.display());
    Ok(files)
}

fn plots(
    scores: &[PromptScores],
    options: &ReportOptions<'_>,
    dir: &Path,
    files: &mut ReportFiles,
) -> Result<(), AnalysisError> {
    let originals: HashMap<&str, &PromptScores> = scores
        .iter()
        .filter(|s| s.is_original())
        .map(|s| (s.prompt_id.as_str(), s))
        .collect();
    let corpora: Vec<Corpus> = {
        let mut c: Vec<Corpus> = scores.iter().map(|s| s.corpus).collect();
        c.sort();
        c.dedup();
        c
    };
    for corpus in corpora {
        for m in [Measure::AveClip, Measure::ImgSim] {
            let mut series: BTreeMap<Deformance, Vec<(f64, f64)>> = BTreeMap::new();
            for s in scores
                .iter()
                .filter(|s| s.corpus == corpus && !s.is_original())
            {
                let Some(o) = originals.get(s.origin_id.as_str()) else {
                    continue;
                };
                if let (Some(a), Some(b)) = (o.get(m), s.get(m)) {
                    if let Some(pc) = percent_change(a, b) {
                        series.entry(s.deformance).or_default().push((a, pc));
                    }
                }
            }
            if series.is_empty() {
                continue;
            }
            let plot = Scatter {
                title: format!("{corpus}: {m} change under deformance"),
                x_label: format!("original {m}"),
                y_label: "percent change".into(),
                series: series
                    .into_iter()
                    .map(|(d, points)| Series {
                        label: d.to_string(),
                        points,
                    })
                    .collect(),
            };
            write_svg(dir, &format!("change_{corpus}_{m}.svg"), &plot, files)?;
        }
    }
    if let Some(ratings) = options.ratings {
        let by_id: HashMap<&str, &PromptScores> =
            scores.iter().map(|s| (s.prompt_id.as_str(), s)).collect();
        for m in [Measure::AveClip, Measure::ImgSim] {
            let points: Vec<(f64, f64)> = ratings
                .iter()
                .filter_map(|(k, r)| {
                    let s = by_id
                        .get(k.as_str())
                        .or_else(|| by_id.get(format!("w:{k}").as_str()))?;
                    Some((*r, s.get(m)?))
                })
                .collect();
            let plot = Scatter {
                title: format!("{m} against rating"),
                x_label: "rating".into(),
                y_label: m.to_string(),
                series: vec![Series {
                    label: m.to_string(),
                    points,
                }],
            };
            write_svg(dir, &format!("rating_{m}.svg"), &plot, files)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tests::row;
    use crate::analysis::{ChangeRow, CorpusAverage};

    fn scores() -> Vec<PromptScores> {
        let mut out = Vec::new();
        for i in 0..12 {
            let id = format!("p{i:02}");
            let v = 50.0 + i as f64;
            out.push(row(
                &id,
                Corpus::Captions,
                Deformance::Original,
                &id,
                [Some(300.0 + v), Some(0.5), None, Some(v), Some(v / 100.0)],
            ));
            for d in [Deformance::Backward, Deformance::JustNouns] {
                out.push(row(
                    &format!("{id}~{d}"),
                    Corpus::Captions,
                    d,
                    &id,
                    [
                        Some(300.0 + v),
                        Some(0.4),
                        None,
                        Some(v - 1.0),
                        Some(v / 110.0),
                    ],
                ));
            }
        }
        out
    }

    #[test]
    fn csv_round_trips_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let options = ReportOptions {
            svg: true,
            header: vec![("config".into(), "{\"seed\":1}".into())],
            ..ReportOptions::default()
        };
        let files = emit_report(&scores(), &options, dir.path()).unwrap();
        let table: Vec<ChangeRow> = read_csv(&dir.path().join("deformance_table.csv")).unwrap();
        assert_eq!(
            table,
            deformance_table(&scores(), Aggregation::MeanOfPairs).rows
        );
        let avg: Vec<CorpusAverage> = read_csv(&dir.path().join("corpus_averages.csv")).unwrap();
        assert_eq!(avg, corpus_averages(&scores()));
        let text = std::fs::read_to_string(dir.path().join("deciles.csv")).unwrap();
        assert!(text.starts_with("#config\t{\"seed\":1}\n"));
        assert!(files.skipped.iter().any(|s| s.contains("hessel")));

        let again = tempfile::tempdir().unwrap();
        emit_report(&scores(), &options, again.path()).unwrap();
        for f in &files.written {
            let name = f.file_name().unwrap();
            assert_eq!(
                std::fs::read(f).unwrap(),
                std::fs::read(again.path().join(name)).unwrap()
            );
        }
    }

    #[test]
    fn plots_have_one_marker_per_pair() {
        let dir = tempfile::tempdir().unwrap();
        let ratings: Vec<(String, f64)> = (0..12).map(|i| (format!("p{i:02}"), i as f64)).collect();
        let options = ReportOptions {
            svg: true,
            ratings: Some(&ratings),
            ..ReportOptions::default()
        };
        emit_report(&scores(), &options, dir.path()).unwrap();
        let svg = std::fs::read_to_string(dir.path().join("change_captions_img_sim.svg")).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(
            doc.descendants()
                .filter(|n| n.has_tag_name("circle"))
                .count(),
            24
        );
        let svg = std::fs::read_to_string(dir.path().join("rating_ave_clip.svg")).unwrap();
        assert_eq!(svg.matches("<circle").count(), 12);
        let corr: Vec<Correlation> = read_csv(&dir.path().join("correlations.csv")).unwrap();
        let clip = corr.iter().find(|c| c.measure == "ave_clip").unwrap();
        assert!((clip.r.unwrap() - 1.0).abs() < 1e-12);
    }
}
