//! Canonical lexicon interchange format.
//!
//! ```text
//! #lexicon v1
//! #source    mrc    9240    1700000000
//! dog    636    622    4.85    n    75
//! idea    301            n
//! ```
//!
//! Fields are tab-separated: word, imageability, MRC concreteness, Brysbaert
//! concreteness, word-type code (`n v a d o u`), Brown frequency. Absent
//! values are empty fields. Further `#` lines are comments.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use super::{Lexicon, LexiconEntry, LexiconError, SourceRecord, WordType};

pub const HEADER: &str = "#lexicon v1";

pub fn write_lexicon<W: Write>(lexicon: &Lexicon, out: W) -> std::io::Result<()> {
    write_lexicon_annotated(lexicon, &[], out)
}

/// Like [`write_lexicon`], with `#key<TAB>value` comment lines after the
/// format line.
pub fn write_lexicon_annotated<W: Write>(
    lexicon: &Lexicon,
    notes: &[(String, String)],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for (k, v) in notes {
        writeln!(out, "#{k}\t{v}")?;
    }
    for source in lexicon.sources() {
        writeln!(
            out,
            "#source\t{}\t{}\t{}",
            source.name, source.records, source.ingested_at
        )?;
    }
    for e in lexicon.iter() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            e.word,
            opt(e.imageability),
            opt(e.concreteness_mrc),
            opt(e.concreteness_brysbaert),
            e.word_type.code(),
            opt(e.brown_freq),
        )?;
    }
    Ok(())
}

fn opt<T: ToString>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn read_lexicon<R: BufRead>(reader: R) -> Result<Lexicon, LexiconError> {
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(first) if first.trim_end().starts_with(HEADER) => {}
        _ => {
            return Err(LexiconError::Format {
                line: 1,
                reason: format!("missing `{HEADER}` header"),
            })
        }
    }
    let mut entries = BTreeMap::new();
    let mut sources = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        let err = |reason: String| LexiconError::Format {
            line: line_no,
            reason,
        };
        let line = line.trim_end_matches('\r');
        if let Some(rest) = line.strip_prefix("#source\t") {
            sources.push(parse_source(rest).map_err(err)?);
            continue;
        }
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let entry = parse_entry(line).map_err(err)?;
        if entries.contains_key(&entry.word) {
            return Err(err(format!("duplicate word `{}`", entry.word)));
        }
        entries.insert(entry.word.clone(), entry);
    }
    Ok(Lexicon { entries, sources })
}

fn parse_source(rest: &str) -> Result<SourceRecord, String> {
    let fields: Vec<&str> = rest.split('\t').collect();
    let [name, records, at] = fields[..] else {
        return Err("source line needs name, count and timestamp".into());
    };
    Ok(SourceRecord {
        name: name.to_string(),
        records: records
            .parse()
            .map_err(|_| format!("bad count `{records}`"))?,
        ingested_at: at.parse().map_err(|_| format!("bad timestamp `{at}`"))?,
    })
}

fn parse_entry(line: &str) -> Result<LexiconEntry, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    let [word, imag, conc, brys, wtype, brown] = fields[..] else {
        return Err(format!("expected 6 fields, found {}", fields.len()));
    };
    let entry = LexiconEntry {
        word: word.to_string(),
        imageability: field(imag)?,
        concreteness_mrc: field(conc)?,
        concreteness_brysbaert: field(brys)?,
        word_type: WordType::from_code(wtype).ok_or_else(|| format!("bad word type `{wtype}`"))?,
        brown_freq: field(brown)?,
    };
    entry.validate()?;
    Ok(entry)
}

fn field<T: FromStr>(text: &str) -> Result<Option<T>, String> {
    if text.is_empty() {
        return Ok(None);
    }
    text.parse()
        .map(Some)
        .map_err(|_| format!("cannot parse `{text}`"))
}
