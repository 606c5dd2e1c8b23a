use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{tokenize, Token};

pub const MANIFEST_HEADER: &str = "#manifest v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corpus {
    Poems,
    Captions,
    News,
    MrcWords,
}

impl Corpus {
    pub const ALL: [Corpus; 4] = [
        Corpus::Poems,
        Corpus::Captions,
        Corpus::News,
        Corpus::MrcWords,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Corpus::Poems => "poems",
            Corpus::Captions => "captions",
            Corpus::News => "news",
            Corpus::MrcWords => "mrc_words",
        }
    }
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Corpus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Corpus::ALL
            .into_iter()
            .find(|c| c.as_str() == s || c.as_str().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown corpus `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deformance {
    Original,
    Backward,
    Permuted,
    JustNouns,
    ReplacedNouns,
}

impl Deformance {
    pub const ALL: [Deformance; 5] = [
        Deformance::Original,
        Deformance::Backward,
        Deformance::Permuted,
        Deformance::JustNouns,
        Deformance::ReplacedNouns,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Deformance::Original => "original",
            Deformance::Backward => "backward",
            Deformance::Permuted => "permuted",
            Deformance::JustNouns => "just_nouns",
            Deformance::ReplacedNouns => "replaced_nouns",
        }
    }

    pub fn is_original(self) -> bool {
        self == Deformance::Original
    }
}

impl fmt::Display for Deformance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Deformance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Deformance::ALL
            .into_iter()
            .find(|d| d.as_str() == s || d.as_str().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown deformance `{s}`"))
    }
}

/// One unit of text sent for image generation.
///
/// `meta` holds provenance as key/value pairs. Two keys are structural:
/// `breaks` lists the token indices where a new source line starts, and
/// `nouns` (optional) lists token indices pre-tagged as nouns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub id: String,
    pub corpus: Corpus,
    pub deformance: Deformance,
    pub origin_id: String,
    pub meta: BTreeMap<String, String>,
    pub text: String,
}

impl Prompt {
    pub fn original(id: impl Into<String>, corpus: Corpus, text: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            origin_id: id.clone(),
            id,
            corpus,
            deformance: Deformance::Original,
            meta: BTreeMap::new(),
            text: text.into(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn tokens(&self) -> Vec<Token> {
        tokenize(&self.text)
    }

    /// Token indices where lines after the first begin.
    pub fn line_breaks(&self) -> Vec<usize> {
        index_list(self.meta.get("breaks"))
    }

    /// Token indices pre-tagged as nouns, if an external tagger supplied them.
    pub fn noun_tags(&self) -> Option<Vec<usize>> {
        self.meta.get("nouns").map(|v| index_list(Some(v)))
    }

    /// Tokens grouped by source line.
    pub fn lines(&self) -> Vec<Vec<Token>> {
        let tokens = self.tokens();
        let mut lines = Vec::new();
        let mut start = 0;
        for brk in self.line_breaks() {
            if brk > start && brk < tokens.len() {
                lines.push(tokens[start..brk].to_vec());
                start = brk;
            }
        }
        lines.push(tokens[start..].to_vec());
        lines.retain(|l| !l.is_empty());
        lines
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() || self.id.contains(['\t', '\n', '\r']) {
            return Err(format!("invalid prompt id {:?}", self.id));
        }
        if self.text.contains(['\t', '\n', '\r']) {
            return Err(format!(
                "prompt `{}` text contains a tab or newline",
                self.id
            ));
        }
        if self.deformance.is_original() && self.origin_id != self.id {
            return Err(format!(
                "original prompt `{}` must be its own origin",
                self.id
            ));
        }
        for (k, v) in &self.meta {
            let bad = |s: &str| s.is_empty() || s.contains(['\t', '\n', '\r', ';', '=']);
            if bad(k) || v.contains(['\t', '\n', '\r', ';', '=']) {
                return Err(format!("prompt `{}` has unencodable meta `{k}`", self.id));
            }
        }
        Ok(())
    }
}

fn index_list(value: Option<&String>) -> Vec<usize> {
    value
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
        .unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("invalid prompt: {0}")]
    Invalid(String),
}

/// A prompt list plus free-form header lines (stored without the `#`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub header: Vec<String>,
    pub prompts: Vec<Prompt>,
}

impl Manifest {
    pub fn new(prompts: Vec<Prompt>) -> Self {
        Self {
            header: Vec::new(),
            prompts,
        }
    }

    /// Ids are unique, originals point at themselves, and every family shares
    /// one corpus.
    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut seen = HashSet::new();
        let mut family: HashMap<&str, Corpus> = HashMap::new();
        for p in &self.prompts {
            p.validate().map_err(ManifestError::Invalid)?;
            if !seen.insert(p.id.as_str()) {
                return Err(ManifestError::Invalid(format!(
                    "duplicate prompt id `{}`",
                    p.id
                )));
            }
            if let Some(&corpus) = family.get(p.origin_id.as_str()) {
                if corpus != p.corpus {
                    return Err(ManifestError::Invalid(format!(
                        "prompt `{}` is {} but its origin `{}` is {}",
                        p.id, p.corpus, p.origin_id, corpus
                    )));
                }
            } else {
                family.insert(p.origin_id.as_str(), p.corpus);
            }
        }
        Ok(())
    }
}

fn encode_meta(meta: &BTreeMap<String, String>) -> String {
    meta.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn decode_meta(field: &str) -> Result<BTreeMap<String, String>, String> {
    field
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|pair| {
            pair.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| format!("meta entry `{pair}` lacks `=`"))
        })
        .collect()
}

/// Writes `#manifest v1`, header lines, then one tab-separated row per prompt:
/// id, corpus, deformance, origin_id, meta, text.
pub fn write_manifest<W: Write>(manifest: &Manifest, mut out: W) -> Result<(), ManifestError> {
    manifest.validate()?;
    writeln!(out, "{MANIFEST_HEADER}")?;
    for line in &manifest.header {
        writeln!(out, "#{line}")?;
    }
    for p in &manifest.prompts {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.id,
            p.corpus,
            p.deformance,
            p.origin_id,
            encode_meta(&p.meta),
            p.text
        )?;
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(reader: R) -> Result<Manifest, ManifestError> {
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(first) if first.trim_end() == MANIFEST_HEADER => {}
        _ => {
            return Err(ManifestError::Format {
                line: 1,
                reason: format!("missing `{MANIFEST_HEADER}` header"),
            })
        }
    }
    let mut manifest = Manifest::default();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        let err = |reason: String| ManifestError::Format {
            line: i + 2,
            reason,
        };
        if let Some(comment) = line.strip_prefix('#') {
            manifest.header.push(comment.to_string());
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(6, '\t').collect();
        let [id, corpus, deformance, origin, meta, text] = fields[..] else {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        };
        manifest.prompts.push(Prompt {
            id: id.to_string(),
            corpus: corpus.parse().map_err(err)?,
            deformance: deformance.parse().map_err(err)?,
            origin_id: origin.to_string(),
            meta: decode_meta(meta).map_err(err)?,
            text: text.to_string(),
        });
    }
    manifest.validate()?;
    Ok(manifest)
}
