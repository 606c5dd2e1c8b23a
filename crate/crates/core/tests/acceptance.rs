//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Licensed-data checks read their inputs from `IMAGEABILITY_MRC`,
//! `IMAGEABILITY_BRYSBAERT` and `IMAGEABILITY_POEMS` and are skipped when
//! those are unset.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use imageability::analysis::{deformance_table, pearson, Aggregation};
use imageability::corpus::{
    detokenize, pair_poem_lines, split_poems, tokenize, Corpus, Deformance, Prompt, Token,
};
use imageability::deformance::{
    deform_backward, deform_just_nouns, deform_permuted, deform_replace_nouns, DeformanceKind,
    Deformer, LexiconTagger,
};
use imageability::genbridge::{mock_generate, Dispersion, GenerationConfig, SyntheticOracle};
use imageability::lexicon::{
    merge, parse_brysbaert, parse_mrc, FixedWidthLayout, Lexicon, LexiconEntry, MrcOptions,
    WordType,
};
use imageability::metrics::{
    ave_clip, bow_concreteness, bow_imageability, img_sim, Measure, NeighborIndex,
};
use imageability::pipeline::{stages, Pipeline, RunConfig, Stage};
use imageability::rng::SplitMix64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand_distr::{Distribution, StandardNormal};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::{Fail, Pass, Skip};

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn within(verdict: Verdict, elapsed: Duration, limit: Option<Duration>) -> Verdict {
    match (verdict, limit) {
        (Pass(d), Some(l)) if elapsed >= l => {
            Fail(format!("{d}; took {elapsed:.2?}, limit {l:.0?}"))
        }
        (v, _) => v,
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn tokens_text(tokens: &[Token]) -> String {
    detokenize(tokens)
}

// ---------------------------------------------------------------- goldens

fn golden_lexicon() -> Lexicon {
    let noun = |w: &str, r: u16| {
        LexiconEntry::new(w)
            .with_imageability(r)
            .with_type(WordType::Noun)
    };
    merge([
        noun("people", 520),
        noun("ox", 520),
        noun("dust", 480),
        noun("murder", 480),
        noun("bicycle", 610),
        noun("cart", 590),
        noun("motor-car", 600),
        LexiconEntry::new("pass")
            .with_imageability(400)
            .with_type(WordType::Verb),
    ])
    .lexicon
}

fn deformance_golden() -> Verdict {
    let lexicon = golden_lexicon();
    let tagger = LexiconTagger::new(&lexicon);
    let line1 = "The people pass through the dust";
    let line2 = "On bicycles, in carts, in motor-cars;";
    let original = format!("{line1} {line2}");
    let mut failures = Vec::new();
    let mut expect = |what: &str, got: String, want: &str| {
        if got != want {
            failures.push(format!("{what}: got {got:?}, want {want:?}"));
        }
    };
    expect(
        "backward line 1",
        tokens_text(&deform_backward(&tokenize(line1))),
        "Dust the through pass people the",
    );
    expect(
        "backward line 2",
        tokens_text(&deform_backward(&tokenize(line2))),
        "Bicycles on, carts in, motor-cars in;",
    );
    let prompt = Prompt::original("t2", Corpus::Poems, original.clone())
        .with_meta("breaks", tokenize(line1).len().to_string());
    let deformer = Deformer::new(&lexicon, 42);
    expect(
        "backward prompt",
        deformer
            .deform(&prompt, DeformanceKind::Backward)
            .prompt
            .text,
        "Dust the through pass people the Bicycles on, carts in, motor-cars in;",
    );
    expect(
        "just-nouns",
        tokens_text(&deform_just_nouns(&tokenize(&original), &tagger)),
        "people dust bicycles carts motor-cars",
    );
    expect(
        "replaced-nouns",
        deformer
            .deform(&prompt, DeformanceKind::ReplacedNouns)
            .prompt
            .text,
        "The ox pass through the murder On bicycles, in carts, in motor-cars;",
    );
    if failures.is_empty() {
        Pass("backward x3, just-nouns and replaced-nouns byte-exact".into())
    } else {
        Fail(failures.join("; "))
    }
}

// ------------------------------------------------------------- properties

const NOUNS: &[(&str, u16)] = &[
    ("dog", 600),
    ("cat", 600),
    ("horse", 600),
    ("tree", 580),
    ("river", 580),
    ("stone", 560),
    ("house", 560),
    ("boat", 560),
    ("idea", 300),
    ("truth", 300),
    ("reason", 280),
    ("fate", 280),
    ("moon", 640),
    ("glass", 520),
    ("lamp", 520),
    ("rope", 540),
    ("storm", 610),
];
const OTHERS: &[(&str, u16, WordType)] = &[
    ("red", 480, WordType::Adjective),
    ("cold", 430, WordType::Adjective),
    ("run", 420, WordType::Verb),
    ("sleep", 420, WordType::Verb),
];
const FILLER: &[&str] = &[
    "the",
    "a",
    "of",
    "in",
    "and",
    "through",
    "under",
    "motor-cars",
    "o'er",
    "dogs",
    "trees",
    "very",
    "we",
    "were",
    "quietly",
    "bicycles",
];
const PUNCT: &[&str] = &["", "", "", ",", ";", ".", "!", "?", ":", ",\""];

fn property_lexicon() -> Lexicon {
    let mut entries: Vec<LexiconEntry> = NOUNS
        .iter()
        .map(|&(w, r)| {
            LexiconEntry::new(w)
                .with_imageability(r)
                .with_type(WordType::Noun)
        })
        .collect();
    entries.extend(
        OTHERS
            .iter()
            .map(|&(w, r, t)| LexiconEntry::new(w).with_imageability(r).with_type(t)),
    );
    merge(entries).lexicon
}

fn vocabulary() -> Vec<&'static str> {
    NOUNS
        .iter()
        .map(|(w, _)| *w)
        .chain(OTHERS.iter().map(|(w, _, _)| *w))
        .chain(FILLER.iter().copied())
        .collect()
}

/// Lines of 1–14 tokens; only the first token may be capitalized.
fn line_strategy() -> impl Strategy<Value = String> {
    let vocab = vocabulary();
    (
        prop::collection::vec((0..vocab.len(), 0..PUNCT.len()), 1..15),
        any::<bool>(),
    )
        .prop_map(move |(slots, capital)| {
            let mut words: Vec<String> = slots
                .iter()
                .map(|&(w, p)| format!("{}{}", vocab[w], PUNCT[p]))
                .collect();
            if capital {
                let first = &mut words[0];
                let mut chars = first.chars();
                if let Some(c) = chars.next() {
                    *first = c.to_uppercase().chain(chars).collect();
                }
            }
            words.join(" ")
        })
}

fn punct_positions(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().map(|t| t.trailing_punct.as_str()).collect()
}

fn check_line(line: &str, seed: u64, lexicon: &Lexicon) -> Result<(), TestCaseError> {
    let tagger = LexiconTagger::new(lexicon);
    let tokens = tokenize(line);

    let twice = deform_backward(&deform_backward(&tokens));
    prop_assert_eq!(
        tokens_text(&twice),
        tokens_text(&tokens),
        "backward involution on {:?}",
        line
    );
    prop_assert_eq!(punct_positions(&twice), punct_positions(&tokens));

    let permuted = deform_permuted(&tokens, &mut SplitMix64::new(seed));
    let bag = |ts: &[Token]| {
        let mut v: Vec<(String, String, bool)> = ts
            .iter()
            .map(|t| {
                (
                    t.surface.clone(),
                    t.trailing_punct.clone(),
                    t.was_capitalized,
                )
            })
            .collect();
        v.sort();
        v
    };
    prop_assert_eq!(
        bag(&permuted),
        bag(&tokens),
        "permuted multiset on {:?}",
        line
    );

    let nouns = deform_just_nouns(&tokens, &tagger);
    prop_assert_eq!(
        deform_just_nouns(&nouns, &tagger),
        nouns.clone(),
        "just-nouns idempotence"
    );
    prop_assert!(nouns.len() <= tokens.len());

    let replaced =
        deform_replace_nouns(&tokens, lexicon, &tagger, &mut SplitMix64::new(seed)).tokens;
    prop_assert_eq!(replaced.len(), tokens.len());
    prop_assert_eq!(punct_positions(&replaced), punct_positions(&tokens));
    let before = bow_imageability(line, lexicon);
    let after = bow_imageability(&tokens_text(&replaced), lexicon);
    prop_assert_eq!(
        (before.value, before.found),
        (after.value, after.found),
        "imag on {:?}",
        line
    );
    Ok(())
}

fn deformance_properties() -> Verdict {
    let lexicon = property_lexicon();
    let cases = 2000;
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    match runner.run(&(line_strategy(), any::<u64>()), |(line, seed)| {
        check_line(&line, seed, &lexicon)
    }) {
        Ok(()) => Pass(format!("{cases} generated lines, four properties each")),
        Err(e) => Fail(e.to_string()),
    }
}

// ------------------------------------------------------- bag-of-words zeros

fn fixture_config(out: &Path) -> Result<RunConfig, String> {
    let mut config = RunConfig::load(&fixtures().join("run.toml"))?;
    config.out_dir = out.to_path_buf();
    Ok(config)
}

fn bow_zero_columns() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = match fixture_config(dir.path()) {
        Ok(c) => c,
        Err(e) => return Fail(e),
    };
    let scores_path = config.out("scores.tsv");
    let run = Pipeline::new(config).run(&[
        Stage::Ingest,
        Stage::Prepare,
        Stage::Deform,
        Stage::Generate,
        Stage::Score,
    ]);
    if let Err(e) = run {
        return Fail(e.to_string());
    }
    let scores = match stages::load_scores(&scores_path) {
        Ok(s) => s,
        Err(e) => return Fail(e.to_string()),
    };
    let table = deformance_table(&scores, Aggregation::MeanOfPairs);
    let required = [
        (Measure::ImagBow, Deformance::Backward),
        (Measure::ImagBow, Deformance::Permuted),
        (Measure::ImagBow, Deformance::ReplacedNouns),
        (Measure::ConcBow, Deformance::Backward),
        (Measure::ConcBow, Deformance::Permuted),
    ];
    let mut problems = Vec::new();
    let mut checked = 0;
    for corpus in [Corpus::Poems, Corpus::Captions, Corpus::News] {
        for (measure, deformance) in required {
            match table.get(corpus, deformance, measure) {
                Some(row) if row.n_pairs > 0 && row.mean_percent_change == Some(0.0) => {
                    checked += 1
                }
                Some(row) => problems.push(format!(
                    "{corpus}/{deformance}/{measure} = {:?} over {} pairs",
                    row.mean_percent_change, row.n_pairs
                )),
                None => problems.push(format!("{corpus}/{deformance}/{measure} missing")),
            }
        }
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{checked} cells exactly 0.0 over poems, captions, news")
        } else {
            problems.join("; ")
        },
    )
}

// ---------------------------------------------------------- metric oracles

fn brute_force_img_sim(set: &[Vec<f32>]) -> f64 {
    let v: Vec<Vec<f64>> = set
        .iter()
        .map(|e| e.iter().map(|&x| f64::from(x)).collect())
        .collect();
    let (mut total, mut pairs) = (0.0, 0usize);
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let dot: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum();
            let ni = v[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            let nj = v[j].iter().map(|a| a * a).sum::<f64>().sqrt();
            total += dot / (ni * nj);
            pairs += 1;
        }
    }
    total / pairs as f64
}

fn metric_oracles() -> Verdict {
    let mut rng = SplitMix64::new(20240611);
    let mut worst_sim: f64 = 0.0;
    let mut worst_clip: f64 = 0.0;
    for _ in 0..100 {
        let n = 2 + rng.below(19);
        let d = 1 + rng.below(16);
        let set: Vec<Vec<f32>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        g as f32
                    })
                    .collect()
            })
            .collect();
        let Some(got) = img_sim(&set).value else {
            return Fail(format!("img_sim absent for n={n}"));
        };
        worst_sim = worst_sim.max((got - brute_force_img_sim(&set)).abs());

        let clips: Vec<f32> = (0..n).map(|_| (rng.unit() * 100.0) as f32).collect();
        let naive = clips.iter().map(|&c| f64::from(c)).sum::<f64>() / n as f64;
        worst_clip = worst_clip.max((ave_clip(&clips).unwrap_or(f64::NAN) - naive).abs());
    }
    let examples: [(&[f64], &[f64], f64); 3] = [
        (&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], 1.0),
        (&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0], -1.0),
        (&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0], 0.6),
    ];
    let mut worst_r: f64 = 0.0;
    for (x, y, want) in examples {
        match pearson(x, y) {
            Ok(r) => worst_r = worst_r.max((r - want).abs()),
            Err(e) => return Fail(format!("pearson({x:?}, {y:?}): {e}")),
        }
    }
    verdict(
        worst_sim <= 1e-10 && worst_clip <= 1e-12 && worst_r <= 1e-10,
        format!(
            "max |Δ| img_sim {worst_sim:.1e} (≤1e-10), ave_clip {worst_clip:.1e} (≤1e-12), pearson {worst_r:.1e} (≤1e-10)"
        ),
    )
}

// ------------------------------------------------------------------ hessel

fn hessel_reconstruction() -> Verdict {
    let six: Vec<Vec<f32>> = vec![
        vec![1.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ];
    let index = NeighborIndex::build(&six, 2);
    let Some(score) = index.word_score(&[0, 1, 2]) else {
        return Fail("no score for the 6-point configuration".into());
    };
    if score.normalized != 2.5 {
        return Fail(format!(
            "6-point normalized score {} != 2.5",
            score.normalized
        ));
    }

    let (trials, n, members, k, dim) = (1000, 200, 10, 10, 8);
    let mut total = 0.0;
    for trial in 0..trials {
        let mut rng = SplitMix64::derive(7, &format!("trial-{trial}"));
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        g as f32
                    })
                    .collect()
            })
            .collect();
        let mut ids: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut ids);
        let index = NeighborIndex::build(&rows, k);
        match index.word_score(&ids[..members]) {
            Some(s) => total += s.normalized,
            None => return Fail(format!("trial {trial}: no score")),
        }
    }
    let mean = total / trials as f64;
    verdict(
        (0.85..=1.15).contains(&mean),
        format!("6-point score 2.5; random assignment mean {mean:.4} over {trials} trials (want [0.85, 1.15])"),
    )
}

// ------------------------------------------------------------ mock end-to-end

/// Ground-truth imageability of a prompt text, in [100, 700].
fn truth(text: &str) -> f64 {
    100.0 + 600.0 * SplitMix64::derive(99, &format!("truth\u{0}{text}")).unit()
}

/// `σ = DISPERSION_SCALE / g`; the mock's expected pairwise cosine is then
/// `g² / (g² + DISPERSION_SCALE²)`.
const DISPERSION_SCALE: f64 = 300.0;

fn truth_oracle(dim: usize) -> SyntheticOracle {
    SyntheticOracle::with_profile(42, dim, |text| {
        let g = truth(text);
        Dispersion {
            sigma: DISPERSION_SCALE / g,
            base_clip: 30.0 + g / 14.0,
        }
    })
}

/// Inputs made absolute and a relative output directory, so both runs
/// serialize the same configuration.
fn end_to_end_run(base: &Path) -> Result<RunConfig, String> {
    let mut config = fixture_config(Path::new("run"))?;
    let inputs = &mut config.inputs;
    for path in [
        &mut inputs.mrc,
        &mut inputs.brysbaert,
        &mut inputs.poems,
        &mut inputs.captions,
        &mut inputs.news,
        &mut inputs.ratings,
    ]
    .into_iter()
    .flatten()
    {
        *path = fixtures().join(&*path);
    }
    config.base_dir = base.to_path_buf();
    config.prepare.captions = 23;
    config.prepare.news = 10;
    config.prepare.words = true;
    config.generation.n_images = 16;
    config.backend.dim = 64;
    config.score.k_nn = 10;
    let dim = config.backend.dim;
    Pipeline::new(config.clone())
        .with_oracle(Arc::new(truth_oracle(dim)))
        .run(&Stage::ALL)
        .map_err(|e| e.to_string())?;
    Ok(config)
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(Result::ok)
                .map(|e| {
                    (
                        e.file_name().to_string_lossy().into_owned(),
                        std::fs::read(e.path()).unwrap_or_default(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn mock_end_to_end() -> Verdict {
    let (a, b) = (
        tempfile::tempdir().expect("tempdir"),
        tempfile::tempdir().expect("tempdir"),
    );
    let config = match end_to_end_run(a.path()) {
        Ok(c) => c,
        Err(e) => return Fail(e),
    };
    if let Err(e) = end_to_end_run(b.path()) {
        return Fail(e);
    }
    let prompts = match stages::load_manifest(&config.out("prompts.tsv")) {
        Ok(m) => m.prompts,
        Err(e) => return Fail(e.to_string()),
    };
    let texts: HashMap<String, String> = match stages::load_manifest(&config.out("deformed.tsv")) {
        Ok(m) => m.prompts.into_iter().map(|p| (p.id, p.text)).collect(),
        Err(e) => return Fail(e.to_string()),
    };
    let scores = match stages::load_scores(&config.out("scores.tsv")) {
        Ok(s) => s,
        Err(e) => return Fail(e.to_string()),
    };
    let (sims, truths): (Vec<f64>, Vec<f64>) = scores
        .iter()
        .filter_map(|s| Some((s.img_sim?, truth(texts.get(&s.prompt_id)?))))
        .unzip();
    let r = match pearson(&sims, &truths) {
        Ok(r) => r,
        Err(e) => return Fail(e.to_string()),
    };
    let expected: Vec<f64> = truths
        .iter()
        .map(|g| g * g / (g * g + DISPERSION_SCALE.powi(2)))
        .collect();
    let r_expected = pearson(&expected, &truths).unwrap_or(f64::NAN);
    let report_a = read_tree(&config.out("report"));
    let report_b = read_tree(&b.path().join("run/report"));
    let identical = !report_a.is_empty() && report_a == report_b;
    verdict(
        prompts.len() == 200 && r > 0.9 && identical,
        format!(
            "{} original prompts, {} scored; r(img_sim, g) = {r:.4} (want > 0.9, noise-free {r_expected:.4}); {} report files {}",
            prompts.len(),
            sims.len(),
            report_a.len(),
            if identical { "byte-identical" } else { "DIFFER" }
        ),
    )
}

// ------------------------------------------------------------- monotonicity

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    for (rank, i) in order.into_iter().enumerate() {
        out[i] = rank as f64;
    }
    out
}

fn dispersion_monotonicity() -> Verdict {
    let sigmas: Vec<f64> = (1..=10).map(|i| 0.1 * i as f64).collect();
    let table = sigmas.clone();
    let oracle = SyntheticOracle::with_profile(5, 512, move |text| {
        let level: usize = text.trim_start_matches("level ").parse().unwrap_or(0);
        Dispersion {
            sigma: table[level],
            base_clip: 70.0,
        }
    });
    let config = GenerationConfig {
        n_images: 16,
        ..GenerationConfig::default()
    };
    let sims: Vec<f64> = (0..sigmas.len())
        .map(|level| {
            let text = format!("level {level}");
            let records = mock_generate(&text, &text, &config, &oracle);
            let set: Vec<&[f32]> = records.iter().map(|r| r.embedding.as_slice()).collect();
            img_sim(&set).value.unwrap_or(f64::NAN)
        })
        .collect();
    let strictly = sims.windows(2).all(|w| w[0] > w[1]);
    let rho = pearson(&ranks(&sigmas), &ranks(&sims)).unwrap_or(f64::NAN);
    verdict(
        strictly && rho == -1.0,
        format!(
            "img_sim over σ=0.1..1.0: {}; rank correlation {rho}",
            sims.iter()
                .map(|s| format!("{s:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

// ------------------------------------------------------------ licensed data

fn env_path(name: &str) -> Option<PathBuf> {
    std::env::var_os(name)
        .map(PathBuf::from)
        .filter(|p| p.exists())
}

fn load_entries(path: &Path, mrc: bool) -> Result<Vec<LexiconEntry>, String> {
    let reader = imageability::fsio::open_buffered(path).map_err(|e| e.to_string())?;
    let parsed = if mrc {
        parse_mrc(reader, &FixedWidthLayout::mrc2(), MrcOptions::default())
    } else {
        parse_brysbaert(reader)
    };
    parsed
        .map(|p| p.entries)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn mrc_word_count() -> Verdict {
    let Some(mrc) = env_path("IMAGEABILITY_MRC") else {
        return Skip("set IMAGEABILITY_MRC to the MRC dictionary file".into());
    };
    match load_entries(&mrc, true) {
        Ok(entries) => {
            let lexicon = merge(entries).lexicon;
            let count = lexicon.iter().filter(|e| e.imageability.is_some()).count();
            verdict(
                count == 4828,
                format!("{count} unique words with imageability (want 4828)"),
            )
        }
        Err(e) => Fail(e),
    }
}

fn merged_licensed_lexicon() -> Option<Result<Lexicon, String>> {
    let mrc = env_path("IMAGEABILITY_MRC")?;
    let brysbaert = env_path("IMAGEABILITY_BRYSBAERT")?;
    Some((|| {
        let mut entries = load_entries(&mrc, true)?;
        entries.extend(load_entries(&brysbaert, false)?);
        Ok(merge(entries).lexicon)
    })())
}

fn brysbaert_vs_mrc() -> Verdict {
    let Some(lexicon) = merged_licensed_lexicon() else {
        return Skip("set IMAGEABILITY_MRC and IMAGEABILITY_BRYSBAERT".into());
    };
    let lexicon = match lexicon {
        Ok(l) => l,
        Err(e) => return Fail(e),
    };
    let (x, y): (Vec<f64>, Vec<f64>) = lexicon
        .iter()
        .filter_map(|e| Some((f64::from(e.concreteness_mrc?), e.concreteness_brysbaert?)))
        .unzip();
    match pearson(&x, &y) {
        Ok(r) => verdict(
            (r - 0.919).abs() <= 0.005,
            format!(
                "r = {r:.4} over {} shared words (want 0.919 ± 0.005)",
                x.len()
            ),
        ),
        Err(e) => Fail(e.to_string()),
    }
}

fn poems_averages() -> Verdict {
    let Some(poems) = env_path("IMAGEABILITY_POEMS") else {
        return Skip(
            "set IMAGEABILITY_POEMS (with IMAGEABILITY_MRC and IMAGEABILITY_BRYSBAERT)".into(),
        );
    };
    let Some(lexicon) = merged_licensed_lexicon() else {
        return Skip("set IMAGEABILITY_MRC and IMAGEABILITY_BRYSBAERT".into());
    };
    let lexicon = match lexicon {
        Ok(l) => l,
        Err(e) => return Fail(e),
    };
    let text = match std::fs::read_to_string(&poems) {
        Ok(t) => t,
        Err(e) => return Fail(format!("{}: {e}", poems.display())),
    };
    let prompts: Vec<Prompt> = split_poems(&text)
        .iter()
        .enumerate()
        .flat_map(|(i, poem)| pair_poem_lines(&format!("poems-{:04}", i + 1), poem))
        .collect();
    let imag: Vec<f64> = prompts
        .iter()
        .filter_map(|p| bow_imageability(&p.text, &lexicon).value)
        .collect();
    let conc: Vec<f64> = prompts
        .iter()
        .filter_map(|p| bow_concreteness(&p.text, &lexicon).value)
        .collect();
    let (Some(mi), Some(mc)) = (
        imageability::analysis::mean(&imag),
        imageability::analysis::mean(&conc),
    ) else {
        return Fail("no scorable poem prompts".into());
    };
    verdict(
        (mi - 323.477).abs() <= 0.5 && (mc - 0.537).abs() <= 0.01,
        format!(
            "{} prompts: imag_bow {mi:.3} (want 323.477 ± 0.5), conc_bow {mc:.4} (want 0.537 ± 0.01)",
            prompts.len()
        ),
    )
}

// --------------------------------------------------------------------- main

type Check = fn() -> Verdict;

fn main() {
    let checks: [(&str, Check, Option<Duration>); 10] = [
        (
            "deformance golden outputs",
            deformance_golden,
            Some(Duration::from_secs(1)),
        ),
        (
            "deformance properties",
            deformance_properties,
            Some(Duration::from_secs(30)),
        ),
        ("bag-of-words zero columns", bow_zero_columns, None),
        ("metric oracles", metric_oracles, None),
        ("hessel reconstruction", hessel_reconstruction, None),
        (
            "mock end-to-end",
            mock_end_to_end,
            Some(Duration::from_secs(120)),
        ),
        ("dispersion monotonicity", dispersion_monotonicity, None),
        (
            "licensed: MRC imageability word count",
            mrc_word_count,
            None,
        ),
        (
            "licensed: Brysbaert vs MRC concreteness",
            brysbaert_vs_mrc,
            None,
        ),
        ("licensed: poems corpus averages", poems_averages, None),
    ];
    let mut failed = 0;
    for (name, check, limit) in checks {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (tag, detail) = match within(outcome, elapsed, limit) {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("{tag} {name}: {detail} [{elapsed:.2?}]");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
