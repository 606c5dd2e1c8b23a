//! The four text deformances: backward, permuted, just nouns, replaced nouns.
//!
//! Every transform works on token lists and is deterministic given its input
//! and generator. Prompt-level application derives one generator per output
//! prompt from the global seed and the prompt id, so results do not depend on
//! processing order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    detokenize, lookup_form, starts_uppercase, tokenize, Corpus, Deformance, Manifest, Prompt,
    Token, LEADING_PUNCT,
};
use crate::lexicon::{Lexicon, WordType};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformanceKind {
    Backward,
    Permuted,
    #[serde(alias = "just-nouns")]
    JustNouns,
    #[serde(alias = "replaced-nouns")]
    ReplacedNouns,
}

impl DeformanceKind {
    pub const ALL: [DeformanceKind; 4] = [
        DeformanceKind::Backward,
        DeformanceKind::Permuted,
        DeformanceKind::JustNouns,
        DeformanceKind::ReplacedNouns,
    ];
}

impl From<DeformanceKind> for Deformance {
    fn from(kind: DeformanceKind) -> Self {
        match kind {
            DeformanceKind::Backward => Deformance::Backward,
            DeformanceKind::Permuted => Deformance::Permuted,
            DeformanceKind::JustNouns => Deformance::JustNouns,
            DeformanceKind::ReplacedNouns => Deformance::ReplacedNouns,
        }
    }
}

impl fmt::Display for DeformanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Deformance::from(*self).fmt(f)
    }
}

impl FromStr for DeformanceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeformanceKind::ALL
            .into_iter()
            .find(|k| Deformance::from(*k).as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown deformance kind `{s}`"))
    }
}

/// Decides which tokens are nouns.
pub trait NounTagger {
    fn is_noun(&self, token: &Token) -> bool;
}

/// Tags a token as a noun when its lexicon entry (plural fallback on) is a noun.
pub struct LexiconTagger<'a> {
    lexicon: &'a Lexicon,
}

impl<'a> LexiconTagger<'a> {
    pub fn new(lexicon: &'a Lexicon) -> Self {
        Self { lexicon }
    }
}

impl NounTagger for LexiconTagger<'_> {
    fn is_noun(&self, token: &Token) -> bool {
        token
            .word()
            .and_then(|w| self.lexicon.lookup(&w, true))
            .is_some_and(|e| e.word_type == WordType::Noun)
    }
}

/// Tags by token position, for input tagged by an external tool.
pub struct IndexTagger {
    nouns: HashSet<usize>,
}

impl IndexTagger {
    pub fn new(nouns: impl IntoIterator<Item = usize>) -> Self {
        Self {
            nouns: nouns.into_iter().collect(),
        }
    }
}

impl NounTagger for IndexTagger {
    fn is_noun(&self, token: &Token) -> bool {
        self.nouns.contains(&token.index)
    }
}

fn reindex(tokens: &mut [Token]) {
    for (i, t) in tokens.iter_mut().enumerate() {
        t.index = i;
    }
}

/// Fully uppercase words of two or more letters, and the pronoun "I".
fn keeps_case(surface: &str) -> bool {
    let body = surface.trim_start_matches(LEADING_PUNCT);
    if body == "I" || body.starts_with("I'") || body.starts_with("I\u{2019}") {
        return true;
    }
    let letters: Vec<char> = body.chars().filter(|c| c.is_alphabetic()).collect();
    letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase())
}

fn lowercased(surface: &str) -> String {
    if keeps_case(surface) {
        surface.to_string()
    } else {
        surface.to_lowercase()
    }
}

fn capitalized(surface: &str) -> String {
    if keeps_case(surface) {
        return surface.to_string();
    }
    let mut done = false;
    surface
        .to_lowercase()
        .chars()
        .flat_map(|c| {
            if !done && c.is_alphabetic() {
                done = true;
                c.to_uppercase().collect::<Vec<_>>()
            } else {
                vec![c]
            }
        })
        .collect()
}

fn with_surface(mut token: Token, surface: String) -> Token {
    token.was_capitalized = starts_uppercase(&surface);
    token.surface = surface;
    token
}

/// Reverses word order within each punctuation-delimited segment of a line.
///
/// A token with trailing punctuation closes its segment. Punctuation stays in
/// its slot, so marks keep their positions in the line. Output is lowercased
/// except the first token, which is capitalized iff the input's first token
/// was.
pub fn deform_backward(tokens: &[Token]) -> Vec<Token> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut start = 0;
    for end in 0..tokens.len() {
        if tokens[end].trailing_punct.is_empty() && end + 1 < tokens.len() {
            continue;
        }
        let segment = &tokens[start..=end];
        for (slot, source) in segment.iter().zip(segment.iter().rev()) {
            out.push(Token {
                surface: source.surface.clone(),
                trailing_punct: slot.trailing_punct.clone(),
                was_capitalized: false,
                index: slot.index,
            });
        }
        start = end + 1;
    }
    let initial_cap = tokens.first().is_some_and(|t| t.was_capitalized);
    out.into_iter()
        .enumerate()
        .map(|(i, t)| {
            let surface = if i == 0 && initial_cap {
                capitalized(&t.surface)
            } else {
                lowercased(&t.surface)
            };
            with_surface(t, surface)
        })
        .collect()
}

/// Shuffles whole tokens; punctuation and case travel with their words.
pub fn deform_permuted(tokens: &[Token], rng: &mut SplitMix64) -> Vec<Token> {
    let mut out = tokens.to_vec();
    rng.shuffle(&mut out);
    reindex(&mut out);
    out
}

/// Keeps only nouns, lowercased and stripped of punctuation.
pub fn deform_just_nouns(tokens: &[Token], tagger: &dyn NounTagger) -> Vec<Token> {
    let mut out: Vec<Token> = tokens
        .iter()
        .filter(|t| tagger.is_noun(t))
        .filter_map(|t| t.word().map(|w| Token::new(w, "", 0)))
        .collect();
    reindex(&mut out);
    out
}

/// Same-imageability word classes used for noun replacement.
///
/// Only words that survive tokenization unchanged are candidates, so a
/// substituted word always looks up to the rating it was chosen for.
pub struct NounReplacer<'a> {
    lexicon: &'a Lexicon,
    classes: BTreeMap<u16, Vec<&'a str>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Replacement {
    pub tokens: Vec<Token>,
    pub replaced: usize,
    /// Nouns whose rating class held no other word.
    pub no_alternative: usize,
}

impl<'a> NounReplacer<'a> {
    pub fn new(lexicon: &'a Lexicon) -> Self {
        let mut classes: BTreeMap<u16, Vec<&'a str>> = BTreeMap::new();
        for entry in lexicon.iter() {
            if let Some(rating) = entry.imageability {
                if is_token_stable(&entry.word) {
                    classes.entry(rating).or_default().push(&entry.word);
                }
            }
        }
        Self { lexicon, classes }
    }

    /// Replaces each noun found exactly in the lexicon with a different word
    /// of identical imageability, chosen uniformly. Nouns that only match
    /// through plural stripping are left alone.
    pub fn replace(
        &self,
        tokens: &[Token],
        tagger: &dyn NounTagger,
        rng: &mut SplitMix64,
    ) -> Replacement {
        let mut result = Replacement {
            tokens: Vec::with_capacity(tokens.len()),
            ..Replacement::default()
        };
        for token in tokens {
            let rating = tagger
                .is_noun(token)
                .then(|| token.word())
                .flatten()
                .and_then(|w| self.lexicon.lookup(&w, false))
                .and_then(|e| e.imageability.map(|r| (e.word.as_str(), r)));
            let Some((word, rating)) = rating else {
                result.tokens.push(token.clone());
                continue;
            };
            let class = self
                .classes
                .get(&rating)
                .map(Vec::as_slice)
                .unwrap_or_default();
            let others: Vec<&str> = class.iter().copied().filter(|w| *w != word).collect();
            if others.is_empty() {
                result.no_alternative += 1;
                result.tokens.push(token.clone());
                continue;
            }
            let choice = others[rng.below(others.len())];
            let lead_len =
                token.surface.len() - token.surface.trim_start_matches(LEADING_PUNCT).len();
            let body = if token.was_capitalized {
                capitalized(choice)
            } else {
                choice.to_string()
            };
            let surface = format!("{}{}", &token.surface[..lead_len], body);
            result.tokens.push(with_surface(token.clone(), surface));
            result.replaced += 1;
        }
        if result.no_alternative > 0 {
            log::debug!(
                "{} nouns had no same-rating alternative",
                result.no_alternative
            );
        }
        result
    }
}

fn is_token_stable(word: &str) -> bool {
    let tokens = tokenize(word);
    tokens.len() == 1
        && tokens[0].surface == word
        && tokens[0].trailing_punct.is_empty()
        && lookup_form(word).as_deref() == Some(word)
}

/// Convenience wrapper building a [`NounReplacer`] for a single call.
pub fn deform_replace_nouns(
    tokens: &[Token],
    lexicon: &Lexicon,
    tagger: &dyn NounTagger,
    rng: &mut SplitMix64,
) -> Replacement {
    NounReplacer::new(lexicon).replace(tokens, tagger, rng)
}

/// Shared state for deforming many prompts.
pub struct Deformer<'a> {
    lexicon: &'a Lexicon,
    replacer: NounReplacer<'a>,
    seed: u64,
}

/// One deformed prompt and its bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deformed {
    pub prompt: Prompt,
    /// The transform left no text; generation should skip this prompt.
    pub empty: bool,
    pub replaced: usize,
    pub no_alternative: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeformSummary {
    pub manifest: Manifest,
    pub deformed: usize,
    pub empty: usize,
    pub replaced: usize,
    pub no_alternative: usize,
}

impl<'a> Deformer<'a> {
    pub fn new(lexicon: &'a Lexicon, seed: u64) -> Self {
        Self {
            lexicon,
            replacer: NounReplacer::new(lexicon),
            seed,
        }
    }

    /// Applies one deformance to an original prompt.
    ///
    /// Backward runs per source line; the others treat the prompt as one
    /// sequence. Pre-tagged noun indices in the prompt's meta take precedence
    /// over lexicon tagging.
    pub fn deform(&self, original: &Prompt, kind: DeformanceKind) -> Deformed {
        let id = format!("{}~{}", original.id, kind);
        let mut rng = SplitMix64::derive(self.seed, &id);
        let lexicon_tagger = LexiconTagger::new(self.lexicon);
        let index_tagger = original.noun_tags().map(IndexTagger::new);
        let tagger: &dyn NounTagger = match &index_tagger {
            Some(t) => t,
            None => &lexicon_tagger,
        };

        let mut meta = original.meta.clone();
        meta.remove("nouns");
        let mut replaced = 0;
        let mut no_alternative = 0;
        let tokens = match kind {
            DeformanceKind::Backward => {
                let lines = original.lines();
                let mut breaks = Vec::new();
                let mut out = Vec::new();
                for line in &lines {
                    if !out.is_empty() {
                        breaks.push(out.len().to_string());
                    }
                    out.extend(deform_backward(line));
                }
                meta.remove("breaks");
                if !breaks.is_empty() {
                    meta.insert("breaks".into(), breaks.join(","));
                }
                out
            }
            DeformanceKind::Permuted => {
                meta.remove("breaks");
                deform_permuted(&original.tokens(), &mut rng)
            }
            DeformanceKind::JustNouns => {
                meta.remove("breaks");
                deform_just_nouns(&original.tokens(), tagger)
            }
            DeformanceKind::ReplacedNouns => {
                let r = self.replacer.replace(&original.tokens(), tagger, &mut rng);
                replaced = r.replaced;
                no_alternative = r.no_alternative;
                if let Some(nouns) = original.meta.get("nouns") {
                    meta.insert("nouns".into(), nouns.clone());
                }
                r.tokens
            }
        };
        Deformed {
            empty: tokens.is_empty(),
            prompt: Prompt {
                id,
                corpus: original.corpus,
                deformance: kind.into(),
                origin_id: original.id.clone(),
                meta,
                text: detokenize(&tokens),
            },
            replaced,
            no_alternative,
        }
    }

    /// Emits every original followed by its deformations, in `kinds` order.
    /// Rows already deformed in the input are dropped. Single-word prompts
    /// (`mrc_words`) are passed through without deformations.
    pub fn deform_manifest(&self, input: &Manifest, kinds: &[DeformanceKind]) -> DeformSummary {
        let mut summary = DeformSummary {
            manifest: Manifest {
                header: input.header.clone(),
                prompts: Vec::new(),
            },
            ..DeformSummary::default()
        };
        let dropped = input
            .prompts
            .iter()
            .filter(|p| !p.deformance.is_original())
            .count();
        if dropped > 0 {
            log::warn!("ignoring {dropped} already-deformed prompts in the input manifest");
        }
        for original in input.prompts.iter().filter(|p| p.deformance.is_original()) {
            summary.manifest.prompts.push(original.clone());
            if original.corpus == Corpus::MrcWords {
                continue;
            }
            for &kind in kinds {
                let d = self.deform(original, kind);
                summary.deformed += 1;
                summary.empty += usize::from(d.empty);
                summary.replaced += d.replaced;
                summary.no_alternative += d.no_alternative;
                summary.manifest.prompts.push(d.prompt);
            }
        }
        summary
    }
}
