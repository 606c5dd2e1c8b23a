use std::collections::HashSet;
use std::ops::RangeInclusive;

use super::{tokenize, Corpus, Prompt, SentenceSplitter};
use crate::lexicon::Lexicon;
use crate::rng::SplitMix64;

/// Token-count window for sampled news sentences.
pub const NEWS_SENTENCE_WORDS: RangeInclusive<usize> = 10..=30;

/// Splits a poems file into poems at blank lines.
pub fn split_poems(text: &str) -> Vec<Vec<String>> {
    let mut poems = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                poems.push(std::mem::take(&mut current));
            }
        } else {
            current.push(line.to_string());
        }
    }
    if !current.is_empty() {
        poems.push(current);
    }
    poems
}

/// Pairs consecutive lines (1,2), (3,4), … of one poem into prompts joined by
/// a space. Empty lines are dropped first; an odd last line stands alone.
pub fn pair_poem_lines<S: AsRef<str>>(poem_id: &str, lines: &[S]) -> Vec<Prompt> {
    let kept: Vec<(usize, &str)> = lines
        .iter()
        .enumerate()
        .map(|(i, l)| (i + 1, l.as_ref().trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    kept.chunks(2)
        .enumerate()
        .map(|(pair, chunk)| {
            let id = format!("{poem_id}-{:03}", pair + 1);
            let text = chunk.iter().map(|(_, l)| *l).collect::<Vec<_>>().join(" ");
            let first_line = chunk[0].0;
            let last_line = chunk[chunk.len() - 1].0;
            let mut prompt = Prompt::original(id, Corpus::Poems, text)
                .with_meta("poem", poem_id)
                .with_meta("lines", format!("{first_line}-{last_line}"));
            if chunk.len() == 2 {
                let first_tokens = tokenize(chunk[0].1).len();
                prompt = prompt.with_meta("breaks", first_tokens.to_string());
            }
            prompt
        })
        .collect()
}

/// Drops captions containing `<PERSON>` or `#`; the rest become prompts
/// verbatim, numbered by their 1-based position in the input.
pub fn filter_captions<S: AsRef<str>>(captions: &[S]) -> Vec<Prompt> {
    captions
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let c = c.as_ref();
            !c.trim().is_empty() && !c.contains("<PERSON>") && !c.contains('#')
        })
        .map(|(i, c)| {
            Prompt::original(
                format!("captions-{:06}", i + 1),
                Corpus::Captions,
                c.as_ref(),
            )
            .with_meta("line", (i + 1).to_string())
        })
        .collect()
}

/// Keeps the first prompt for each distinct text.
pub fn dedup_prompts(prompts: Vec<Prompt>) -> Vec<Prompt> {
    let mut seen = HashSet::new();
    prompts
        .into_iter()
        .filter(|p| seen.insert(p.text.clone()))
        .collect()
}

/// Draws `n` prompts uniformly without replacement, returned in input order.
/// Returns everything when fewer than `n` are available.
pub fn sample_prompts(prompts: Vec<Prompt>, n: usize, seed: u64, key: &str) -> Vec<Prompt> {
    if prompts.len() <= n {
        return prompts;
    }
    let mut order: Vec<usize> = (0..prompts.len()).collect();
    SplitMix64::derive(seed, key).shuffle(&mut order);
    let mut chosen = order[..n].to_vec();
    chosen.sort_unstable();
    let mut keep = vec![false; prompts.len()];
    for i in chosen {
        keep[i] = true;
    }
    prompts
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewsSample {
    pub prompts: Vec<Prompt>,
    /// Distinct sentences inside the length window.
    pub eligible: usize,
    /// Fewer than the requested number qualified.
    pub shortfall: bool,
}

/// Splits articles into sentences, keeps distinct sentences of 10–30 tokens
/// and samples `n` of them with the seeded generator.
pub fn sample_news_sentences<S: AsRef<str>>(
    articles: &[S],
    n: usize,
    seed: u64,
    splitter: &dyn SentenceSplitter,
) -> NewsSample {
    let mut eligible = Vec::new();
    for (a, article) in articles.iter().enumerate() {
        for (s, sentence) in splitter.split(article.as_ref()).into_iter().enumerate() {
            if NEWS_SENTENCE_WORDS.contains(&tokenize(sentence).len()) {
                let id = format!("news-{:05}-{:03}", a + 1, s + 1);
                eligible.push(
                    Prompt::original(id, Corpus::News, sentence)
                        .with_meta("article", (a + 1).to_string())
                        .with_meta("sentence", (s + 1).to_string()),
                );
            }
        }
    }
    let eligible = dedup_prompts(eligible);
    let count = eligible.len();
    NewsSample {
        prompts: sample_prompts(eligible, n, seed, "news"),
        eligible: count,
        shortfall: count < n,
    }
}

/// One prompt per word that carries an imageability rating.
pub fn words_as_prompts(lexicon: &Lexicon) -> Vec<Prompt> {
    lexicon
        .iter()
        .filter(|e| e.imageability.is_some())
        .map(|e| Prompt::original(format!("w:{}", e.word), Corpus::MrcWords, e.word.clone()))
        .collect()
}
