//! Tokenization and prompt construction for the four corpora.

mod prompt;
mod sources;
mod split;

pub use prompt::{
    read_manifest, write_manifest, Corpus, Deformance, Manifest, ManifestError, Prompt,
    MANIFEST_HEADER,
};
pub use sources::{
    dedup_prompts, filter_captions, pair_poem_lines, sample_news_sentences, sample_prompts,
    split_poems, words_as_prompts, NewsSample,
};
pub use split::{RuleSplitter, SentenceSplitter};

/// Characters peeled off the end of a whitespace-delimited piece.
///
/// Hyphens and word-internal apostrophes never split a word.
pub const TRAILING_PUNCT: &[char] = &[
    '.', ',', ';', ':', '!', '?', '"', '\'', ')', ']', '…', '\u{201D}', '\u{2019}',
];

/// Opening marks that may precede a word; stripped only for lexicon lookup.
pub const LEADING_PUNCT: &[char] = &[
    '"', '\'', '(', '[', '\u{201C}', '\u{2018}', '\u{AB}', '\u{BF}', '\u{A1}',
];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub trailing_punct: String,
    pub was_capitalized: bool,
    /// Position within the tokenized text.
    pub index: usize,
}

impl Token {
    pub fn new(
        surface: impl Into<String>,
        trailing_punct: impl Into<String>,
        index: usize,
    ) -> Self {
        let surface = surface.into();
        Self {
            was_capitalized: starts_uppercase(&surface),
            surface,
            trailing_punct: trailing_punct.into(),
            index,
        }
    }

    /// Lowercase form with edge punctuation removed, or `None` when nothing
    /// word-like is left.
    pub fn word(&self) -> Option<String> {
        lookup_form(&self.surface)
    }
}

/// Lowercase `text` with leading and trailing punctuation stripped.
pub fn lookup_form(text: &str) -> Option<String> {
    let trimmed = text.trim_matches(|c| TRAILING_PUNCT.contains(&c) || LEADING_PUNCT.contains(&c));
    (!trimmed.is_empty()).then(|| trimmed.to_lowercase())
}

/// True when the first alphabetic character is uppercase.
pub fn starts_uppercase(text: &str) -> bool {
    text.chars()
        .find(|c| c.is_alphabetic())
        .is_some_and(char::is_uppercase)
}

/// Splits on whitespace and peels trailing punctuation into `trailing_punct`.
///
/// A piece made only of punctuation stays whole as its own surface.
pub fn tokenize(line: &str) -> Vec<Token> {
    line.split_whitespace()
        .enumerate()
        .map(|(index, piece)| {
            let body = piece.trim_end_matches(TRAILING_PUNCT);
            if body.is_empty() {
                Token::new(piece, "", index)
            } else {
                Token::new(body, &piece[body.len()..], index)
            }
        })
        .collect()
}

/// Joins `surface + trailing_punct` with single spaces.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.surface);
        out.push_str(&t.trailing_punct);
    }
    out
}

/// Word forms used by the scorers: lookup forms of every token that
/// contains a letter or digit. Free-standing dashes and similar marks are
/// not words.
pub fn words(text: &str) -> Vec<String> {
    tokenize(text)
        .iter()
        .filter_map(Token::word)
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .collect()
}
