use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;

use super::{LexiconEntry, LexiconError, ParseOutcome, RecordIssue, WordType, MRC_RANGE};

const DEFAULT_LAYOUT: &str = include_str!("../../config/mrc2_layout.toml");

/// A byte span inside a fixed-width record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct Column {
    pub start: usize,
    pub len: usize,
}

impl Column {
    fn end(self) -> usize {
        self.start + self.len
    }
}

/// Where each field sits in an MRC dictionary line.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct FixedWidthLayout {
    pub imageability: Column,
    pub concreteness: Column,
    pub brown_freq: Column,
    pub word_type: Column,
    /// Offset of the first byte of the `WORD|PHON|...` tail.
    pub word_start: usize,
    #[serde(default = "default_delimiter")]
    pub word_delimiter: char,
    /// Source word-type code → word type.
    #[serde(default)]
    pub word_types: BTreeMap<String, WordType>,
}

fn default_delimiter() -> char {
    '|'
}

impl FixedWidthLayout {
    /// The bundled layout for `mrc2.dct`.
    pub fn mrc2() -> Self {
        Self::from_toml_str(DEFAULT_LAYOUT).expect("bundled layout parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, LexiconError> {
        toml::from_str(text).map_err(|e| LexiconError::Layout(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Shortest line the numeric columns fit into.
    fn min_len(&self) -> usize {
        [
            self.imageability.end(),
            self.concreteness.end(),
            self.brown_freq.end(),
            self.word_type.end(),
            self.word_start + 1,
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MrcOptions {
    /// Keep records without an imageability rating.
    pub include_all: bool,
}

/// Parses MRC dictionary records.
///
/// Zero-valued rating and frequency columns are read as absent. Malformed
/// records are reported with their line number and skipped.
pub fn parse_mrc<R: BufRead>(
    mut reader: R,
    layout: &FixedWidthLayout,
    options: MrcOptions,
) -> Result<ParseOutcome, LexiconError> {
    let mut outcome = ParseOutcome::default();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        if buf.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        match parse_record(&buf, layout) {
            Ok(entry) if options.include_all || entry.imageability.is_some() => {
                outcome.entries.push(entry)
            }
            Ok(_) => outcome.filtered += 1,
            Err(reason) => {
                log::debug!("mrc line {line_no}: {reason}");
                outcome.malformed.push(RecordIssue {
                    line: line_no,
                    reason,
                });
            }
        }
    }
    Ok(outcome)
}

fn parse_record(line: &[u8], layout: &FixedWidthLayout) -> Result<LexiconEntry, String> {
    if line.len() < layout.min_len() {
        return Err(format!(
            "record has {} bytes, layout needs {}",
            line.len(),
            layout.min_len()
        ));
    }
    let imageability = rating(line, layout.imageability, "imageability")?;
    let concreteness = rating(line, layout.concreteness, "concreteness")?;
    let brown = digits(line, layout.brown_freq, "brown_freq")?;

    let code = String::from_utf8_lossy(&line[layout.word_type.start..layout.word_type.end()]);
    let word_type = layout
        .word_types
        .get(code.trim())
        .copied()
        .unwrap_or(WordType::Unknown);

    let tail = String::from_utf8_lossy(&line[layout.word_start..]);
    let word = tail
        .split(layout.word_delimiter)
        .next()
        .unwrap_or_default()
        .trim()
        .to_lowercase();
    let entry = LexiconEntry {
        word,
        imageability,
        concreteness_mrc: concreteness,
        concreteness_brysbaert: None,
        word_type,
        brown_freq: u32::try_from(brown).ok().filter(|&f| f > 0),
    };
    entry.validate()?;
    Ok(entry)
}

fn digits(line: &[u8], column: Column, name: &str) -> Result<u64, String> {
    let field = &line[column.start..column.end()];
    if !field.iter().all(u8::is_ascii_digit) {
        return Err(format!(
            "non-digit bytes in {name} column: {:?}",
            String::from_utf8_lossy(field)
        ));
    }
    Ok(field
        .iter()
        .fold(0u64, |acc, b| acc * 10 + u64::from(b - b'0')))
}

fn rating(line: &[u8], column: Column, name: &str) -> Result<Option<u16>, String> {
    match digits(line, column, name)? {
        0 => Ok(None),
        v => u16::try_from(v)
            .ok()
            .filter(|r| MRC_RANGE.contains(r))
            .map(Some)
            .ok_or_else(|| format!("{name} {v} outside 100..=700")),
    }
}
