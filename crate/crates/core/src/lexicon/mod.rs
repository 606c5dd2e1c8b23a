//! Psycholinguistic word ratings.
//!
//! Two source databases feed the lexicon: the MRC Psycholinguistic Database
//! (fixed-width records carrying imageability, concreteness, Brown frequency
//! and a word-type code) and the Brysbaert concreteness norms (a tab-separated
//! table on a 1–5 scale). Both parse into [`LexiconEntry`] values which
//! [`merge`] folds into an immutable [`Lexicon`] keyed by lowercase word.
//!
//! The merged lexicon is persisted in a small canonical text format (see
//! [`canonical`]) so that downstream stages and tests never need the licensed
//! source files.

mod brysbaert;
pub mod canonical;
mod mrc;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use brysbaert::parse_brysbaert;
pub use mrc::{parse_mrc, Column, FixedWidthLayout, MrcOptions};

/// MRC rating scale shared by imageability and concreteness.
pub const MRC_RANGE: std::ops::RangeInclusive<u16> = 100..=700;
/// Brysbaert concreteness scale.
pub const BRYSBAERT_RANGE: std::ops::RangeInclusive<f64> = 1.0..=5.0;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("required column `{0}` missing from header")]
    MissingColumn(String),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("invalid layout: {0}")]
    Layout(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordType {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Other,
    Unknown,
}

impl WordType {
    /// Single-letter code used by the canonical format.
    pub fn code(self) -> char {
        match self {
            WordType::Noun => 'n',
            WordType::Verb => 'v',
            WordType::Adjective => 'a',
            WordType::Adverb => 'd',
            WordType::Other => 'o',
            WordType::Unknown => 'u',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Some(match code {
            "n" => WordType::Noun,
            "v" => WordType::Verb,
            "a" => WordType::Adjective,
            "d" => WordType::Adverb,
            "o" => WordType::Other,
            "u" => WordType::Unknown,
            _ => return None,
        })
    }
}

impl fmt::Display for WordType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            WordType::Noun => "noun",
            WordType::Verb => "verb",
            WordType::Adjective => "adjective",
            WordType::Adverb => "adverb",
            WordType::Other => "other",
            WordType::Unknown => "unknown",
        };
        f.write_str(name)
    }
}

impl FromStr for WordType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "noun" => WordType::Noun,
            "verb" => WordType::Verb,
            "adjective" => WordType::Adjective,
            "adverb" => WordType::Adverb,
            "other" => WordType::Other,
            "unknown" => WordType::Unknown,
            other => return Err(format!("unknown word type `{other}`")),
        })
    }
}

/// One word's ratings. Absent ratings are `None`, never zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub word: String,
    pub imageability: Option<u16>,
    pub concreteness_mrc: Option<u16>,
    pub concreteness_brysbaert: Option<f64>,
    pub word_type: WordType,
    pub brown_freq: Option<u32>,
}

impl LexiconEntry {
    pub fn new(word: impl Into<String>) -> Self {
        Self {
            word: word.into(),
            imageability: None,
            concreteness_mrc: None,
            concreteness_brysbaert: None,
            word_type: WordType::Unknown,
            brown_freq: None,
        }
    }

    pub fn with_imageability(mut self, rating: u16) -> Self {
        self.imageability = Some(rating);
        self
    }

    pub fn with_concreteness_mrc(mut self, rating: u16) -> Self {
        self.concreteness_mrc = Some(rating);
        self
    }

    pub fn with_brysbaert(mut self, rating: f64) -> Self {
        self.concreteness_brysbaert = Some(rating);
        self
    }

    pub fn with_type(mut self, word_type: WordType) -> Self {
        self.word_type = word_type;
        self
    }

    pub fn with_brown_freq(mut self, freq: u32) -> Self {
        self.brown_freq = Some(freq);
        self
    }

    /// Checks the word-shape and rating-range invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.word.is_empty() {
            return Err("empty word".into());
        }
        if self.word.chars().any(char::is_whitespace) {
            return Err(format!("word `{}` contains whitespace", self.word));
        }
        if self.word.to_lowercase() != self.word {
            return Err(format!("word `{}` is not lowercase", self.word));
        }
        for (name, value) in [
            ("imageability", self.imageability),
            ("concreteness_mrc", self.concreteness_mrc),
        ] {
            if let Some(v) = value {
                if !MRC_RANGE.contains(&v) {
                    return Err(format!("{name} {v} outside 100..=700"));
                }
            }
        }
        if let Some(c) = self.concreteness_brysbaert {
            if !BRYSBAERT_RANGE.contains(&c) {
                return Err(format!("brysbaert concreteness {c} outside 1..=5"));
            }
        }
        Ok(())
    }
}

/// Provenance of one ingested source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRecord {
    pub name: String,
    pub records: usize,
    /// Seconds since the Unix epoch.
    pub ingested_at: u64,
}

/// Immutable word → ratings map. Lookups are case-insensitive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
    sources: Vec<SourceRecord>,
}

impl Lexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending word order.
    pub fn iter(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    pub fn sources(&self) -> &[SourceRecord] {
        &self.sources
    }

    pub fn with_source(mut self, source: SourceRecord) -> Self {
        self.sources.push(source);
        self
    }

    /// Exact, case-insensitive lookup.
    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        if word.chars().any(char::is_uppercase) {
            self.entries.get(&word.to_lowercase())
        } else {
            self.entries.get(word)
        }
    }

    /// Case-insensitive lookup. With `plural_fallback`, a miss retries after
    /// stripping a trailing `s`, then a trailing `es`.
    pub fn lookup(&self, token: &str, plural_fallback: bool) -> Option<&LexiconEntry> {
        let key = token.to_lowercase();
        if let Some(entry) = self.entries.get(&key) {
            return Some(entry);
        }
        if !plural_fallback {
            return None;
        }
        ["s", "es"]
            .iter()
            .filter_map(|suffix| key.strip_suffix(suffix))
            .filter(|stem| !stem.is_empty())
            .find_map(|stem| self.entries.get(stem))
    }
}

/// Result of [`merge`]: the lexicon plus how many numeric disagreements
/// were resolved in favour of the earlier entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub lexicon: Lexicon,
    pub conflicts: usize,
}

/// Folds entries into one record per word.
///
/// The first present value of each field wins; later sources only fill gaps.
/// Word type takes the first value that is not `Unknown`.
pub fn merge<I>(entries: I) -> MergeOutcome
where
    I: IntoIterator<Item = LexiconEntry>,
{
    let mut map: BTreeMap<String, LexiconEntry> = BTreeMap::new();
    let mut conflicts = 0;
    for mut entry in entries {
        entry.word = entry.word.to_lowercase();
        match map.get_mut(&entry.word) {
            None => {
                map.insert(entry.word.clone(), entry);
            }
            Some(kept) => {
                conflicts += usize::from(fill(&mut kept.imageability, entry.imageability));
                conflicts += usize::from(fill(&mut kept.concreteness_mrc, entry.concreteness_mrc));
                conflicts += usize::from(fill(
                    &mut kept.concreteness_brysbaert,
                    entry.concreteness_brysbaert,
                ));
                conflicts += usize::from(fill(&mut kept.brown_freq, entry.brown_freq));
                if kept.word_type == WordType::Unknown {
                    kept.word_type = entry.word_type;
                }
            }
        }
    }
    if conflicts > 0 {
        log::warn!("lexicon merge kept first value for {conflicts} conflicting ratings");
    }
    MergeOutcome {
        lexicon: Lexicon {
            entries: map,
            sources: Vec::new(),
        },
        conflicts,
    }
}

/// Fills `slot` from `incoming` when empty; returns true on a disagreement.
fn fill<T: PartialEq>(slot: &mut Option<T>, incoming: Option<T>) -> bool {
    match (slot.as_ref(), incoming) {
        (None, value) => {
            *slot = value;
            false
        }
        (Some(kept), Some(value)) => *kept != value,
        (Some(_), None) => false,
    }
}

/// A malformed source record that was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordIssue {
    /// 1-based line number in the source file.
    pub line: usize,
    pub reason: String,
}

/// Entries accepted from one source plus what was skipped.
#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub entries: Vec<LexiconEntry>,
    pub malformed: Vec<RecordIssue>,
    /// Well-formed records filtered out by policy (no imageability, multi-word).
    pub filtered: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dog(rating: Option<u16>) -> LexiconEntry {
        LexiconEntry {
            imageability: rating,
            ..LexiconEntry::new("dog")
        }
    }

    #[test]
    fn merge_fills_absent_fields() {
        let out = merge([dog(Some(636)), dog(None).with_brysbaert(4.85)]);
        let entry = out.lexicon.get("dog").unwrap();
        assert_eq!(entry.imageability, Some(636));
        assert_eq!(entry.concreteness_brysbaert, Some(4.85));
        assert_eq!(out.conflicts, 0);

        let out = merge([dog(None), dog(Some(636))]);
        assert_eq!(out.lexicon.get("dog").unwrap().imageability, Some(636));
    }

    #[test]
    fn merge_first_source_wins_on_conflict() {
        let out = merge([dog(Some(636)), dog(Some(640))]);
        assert_eq!(out.lexicon.get("dog").unwrap().imageability, Some(636));
        assert_eq!(out.conflicts, 1);
    }

    #[test]
    fn merge_takes_first_known_word_type() {
        let out = merge([
            dog(None),
            dog(None).with_type(WordType::Noun),
            dog(None).with_type(WordType::Verb),
        ]);
        assert_eq!(out.lexicon.get("dog").unwrap().word_type, WordType::Noun);
    }

    #[test]
    fn merge_of_nothing_is_empty() {
        let out = merge(Vec::new());
        assert!(out.lexicon.is_empty());
        assert_eq!(out.conflicts, 0);
    }

    #[test]
    fn merge_is_idempotent() {
        let first = merge([
            dog(Some(636)),
            LexiconEntry::new("Cat").with_imageability(600),
            dog(Some(640)).with_type(WordType::Noun),
        ])
        .lexicon;
        let again = merge(first.iter().cloned()).lexicon;
        assert_eq!(first, again);
    }

    #[test]
    fn lookup_rules() {
        let lex = merge([
            LexiconEntry::new("dog").with_imageability(636),
            LexiconEntry::new("glass").with_imageability(580),
            LexiconEntry::new("cart").with_imageability(590),
        ])
        .lexicon;
        assert_eq!(lex.lookup("Dogs", true).unwrap().word, "dog");
        assert!(lex.lookup("carts", false).is_none());
        assert_eq!(lex.lookup("carts", true).unwrap().word, "cart");
        assert_eq!(lex.lookup("glass", true).unwrap().word, "glass");
        assert_eq!(lex.lookup("glasses", true).unwrap().word, "glass");
        assert_eq!(lex.lookup("DOG", false).unwrap().word, "dog");
        assert!(lex.lookup("s", true).is_none());
    }

    #[test]
    fn validate_rejects_out_of_range() {
        assert!(LexiconEntry::new("x")
            .with_imageability(99)
            .validate()
            .is_err());
        assert!(LexiconEntry::new("x")
            .with_imageability(700)
            .validate()
            .is_ok());
        assert!(LexiconEntry::new("x")
            .with_brysbaert(5.01)
            .validate()
            .is_err());
        assert!(LexiconEntry::new("X").validate().is_err());
        assert!(LexiconEntry::new("a b").validate().is_err());
        assert!(LexiconEntry::new("").validate().is_err());
    }

    #[test]
    fn word_type_codes_round_trip() {
        for t in [
            WordType::Noun,
            WordType::Verb,
            WordType::Adjective,
            WordType::Adverb,
            WordType::Other,
            WordType::Unknown,
        ] {
            assert_eq!(WordType::from_code(&t.code().to_string()), Some(t));
            assert_eq!(t.to_string().parse::<WordType>(), Ok(t));
        }
    }
}
