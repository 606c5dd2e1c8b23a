//! Binary image store plus its plain-text index.
//!
//! Blob file, little-endian:
//!
//! ```text
//! "IMGB" | u8 version=1 | u32 D | u64 rows | rows × (f32 clip_score, f32 × D)
//! ```
//!
//! Index file (`<store>.idx`):
//!
//! ```text
//! #imgb-index v1
//! prompt_id    offset    count    digest
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ImageRecord;
use crate::fsio;

pub const MAGIC: &[u8; 4] = b"IMGB";
pub const VERSION: u8 = 1;
pub const INDEX_HEADER: &str = "#imgb-index v1";
const HEADER_LEN: usize = 4 + 1 + 4 + 8;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}: not an image store (bad magic)")]
    BadMagic(PathBuf),
    #[error("{path}: store version {found}, expected {VERSION}")]
    VersionMismatch { path: PathBuf, found: u8 },
    #[error("{path}: truncated, header promises {expected} bytes but file has {actual}")]
    TruncatedFile {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{path}: corrupt index at line {line}: {reason}")]
    CorruptIndex {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("prompt `{prompt_id}`: embedding has {got} values, store expects {expected}")]
    DimensionMismatch {
        prompt_id: String,
        expected: usize,
        got: usize,
    },
    #[error("prompt `{0}` is already stored")]
    Duplicate(String),
}

/// Where one prompt's rows live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub offset: usize,
    pub count: usize,
    /// Digest of the request that produced these rows; a cache hit needs a
    /// matching digest.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageStore {
    dim: usize,
    index: BTreeMap<String, Span>,
    scores: Vec<f32>,
    blob: Vec<f32>,
}

impl ImageStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            index: BTreeMap::new(),
            scores: Vec::new(),
            blob: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total stored image rows.
    pub fn rows(&self) -> usize {
        self.scores.len()
    }

    pub fn prompt_count(&self) -> usize {
        self.index.len()
    }

    pub fn span(&self, prompt_id: &str) -> Option<&Span> {
        self.index.get(prompt_id)
    }

    pub fn spans(&self) -> impl Iterator<Item = (&str, &Span)> {
        self.index.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn clip_score(&self, row: usize) -> f32 {
        self.scores[row]
    }

    pub fn embedding(&self, row: usize) -> &[f32] {
        &self.blob[row * self.dim..(row + 1) * self.dim]
    }

    /// Row indices of one prompt's images.
    pub fn row_range(&self, prompt_id: &str) -> Option<std::ops::Range<usize>> {
        self.span(prompt_id).map(|s| s.offset..s.offset + s.count)
    }

    pub fn clip_scores(&self, prompt_id: &str) -> &[f32] {
        self.row_range(prompt_id)
            .map(|r| &self.scores[r])
            .unwrap_or(&[])
    }

    pub fn embeddings(&self, prompt_id: &str) -> Vec<&[f32]> {
        self.row_range(prompt_id)
            .map(|r| r.map(|row| self.embedding(row)).collect())
            .unwrap_or_default()
    }

    pub fn records(&self, prompt_id: &str) -> Vec<ImageRecord> {
        self.row_range(prompt_id)
            .map(|r| {
                r.enumerate()
                    .map(|(image_index, row)| ImageRecord {
                        prompt_id: prompt_id.to_string(),
                        image_index,
                        clip_score: self.scores[row],
                        embedding: self.embedding(row).to_vec(),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Appends one prompt's images. All-or-nothing: a wrong dimension
    /// leaves the store untouched.
    pub fn insert(
        &mut self,
        prompt_id: &str,
        digest: &str,
        images: &[(f32, &[f32])],
    ) -> Result<(), StoreError> {
        if self.index.contains_key(prompt_id) {
            return Err(StoreError::Duplicate(prompt_id.to_string()));
        }
        if let Some((_, bad)) = images.iter().find(|(_, e)| e.len() != self.dim) {
            return Err(StoreError::DimensionMismatch {
                prompt_id: prompt_id.to_string(),
                expected: self.dim,
                got: bad.len(),
            });
        }
        let offset = self.rows();
        for (score, embedding) in images {
            self.scores.push(*score);
            self.blob.extend_from_slice(embedding);
        }
        self.index.insert(
            prompt_id.to_string(),
            Span {
                offset,
                count: images.len(),
                digest: digest.to_string(),
            },
        );
        Ok(())
    }

    /// Copies one prompt's rows from another store of the same dimension.
    pub fn copy_from(&mut self, other: &ImageStore, prompt_id: &str) -> Result<bool, StoreError> {
        let Some(span) = other.span(prompt_id) else {
            return Ok(false);
        };
        let rows: Vec<(f32, &[f32])> = (span.offset..span.offset + span.count)
            .map(|r| (other.clip_score(r), other.embedding(r)))
            .collect();
        self.insert(prompt_id, &span.digest, &rows)?;
        Ok(true)
    }

    /// SHA-256 over the serialized blob and index, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        let mut blob = Vec::new();
        self.write_blob(&mut blob).expect("writing to memory");
        hasher.update(&blob);
        let mut index = Vec::new();
        self.write_index(&mut index).expect("writing to memory");
        hasher.update(&index);
        hex(&hasher.finalize())
    }

    pub fn write_blob<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&[VERSION])?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.rows() as u64).to_le_bytes())?;
        for row in 0..self.rows() {
            out.write_all(&self.scores[row].to_le_bytes())?;
            for x in self.embedding(row) {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn write_index<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{INDEX_HEADER}")?;
        let mut spans: Vec<_> = self.index.iter().collect();
        spans.sort_by_key(|(_, s)| s.offset);
        for (id, s) in spans {
            writeln!(out, "{id}\t{}\t{}\t{}", s.offset, s.count, s.digest)?;
        }
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn index_path(store: &Path) -> PathBuf {
    let mut name = store.as_os_str().to_owned();
    name.push(".idx");
    PathBuf::from(name)
}

/// Writes blob then index, each atomically.
pub fn save_store(store: &ImageStore, path: &Path) -> Result<(), StoreError> {
    fsio::write_atomic(path, |w| store.write_blob(w).map_err(StoreError::from))?;
    fsio::write_atomic(&index_path(path), |w| {
        store.write_index(w).map_err(StoreError::from)
    })
}

pub fn load_store(path: &Path) -> Result<ImageStore, StoreError> {
    let mut bytes = Vec::new();
    fsio::open_buffered(path)?.read_to_end(&mut bytes)?;
    let store = parse_blob(&bytes, path)?;
    let index = fsio::open_buffered(&index_path(path))?;
    attach_index(store, index, &index_path(path))
}

fn parse_blob(bytes: &[u8], path: &Path) -> Result<ImageStore, StoreError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(StoreError::BadMagic(path.to_path_buf()));
    }
    let truncated = |expected: u64| StoreError::TruncatedFile {
        path: path.to_path_buf(),
        expected,
        actual: bytes.len() as u64,
    };
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN as u64));
    }
    if bytes[4] != VERSION {
        return Err(StoreError::VersionMismatch {
            path: path.to_path_buf(),
            found: bytes[4],
        });
    }
    let dim = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let rows = u64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes"));
    let expected = (rows as u128) * ((dim as u128 + 1) * 4) + HEADER_LEN as u128;
    if (bytes.len() as u128) < expected {
        return Err(truncated(expected.min(u64::MAX as u128) as u64));
    }
    if (bytes.len() as u128) > expected {
        return Err(StoreError::CorruptIndex {
            path: path.to_path_buf(),
            line: 0,
            reason: format!(
                "{} trailing bytes after last row",
                bytes.len() as u128 - expected
            ),
        });
    }
    let rows = rows as usize;
    let mut scores = Vec::with_capacity(rows);
    let mut blob = Vec::with_capacity(rows * dim);
    let floats = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    for (i, x) in floats.enumerate() {
        if i % (dim + 1) == 0 {
            scores.push(x);
        } else {
            blob.push(x);
        }
    }
    let mut store = ImageStore::new(dim);
    store.scores = scores;
    store.blob = blob;
    Ok(store)
}

fn attach_index<R: BufRead>(
    mut store: ImageStore,
    reader: R,
    path: &Path,
) -> Result<ImageStore, StoreError> {
    let corrupt = |line: usize, reason: String| StoreError::CorruptIndex {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(first) if first.trim_end() == INDEX_HEADER => {}
        _ => return Err(corrupt(1, format!("missing `{INDEX_HEADER}` header"))),
    }
    let mut spans: Vec<(usize, usize, usize)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, offset, count, digest] = fields[..] else {
            return Err(corrupt(
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| corrupt(line_no, format!("bad number `{s}`")))
        };
        let span = Span {
            offset: parse(offset)?,
            count: parse(count)?,
            digest: digest.to_string(),
        };
        if span.offset + span.count > store.rows() {
            return Err(corrupt(
                line_no,
                format!("span for `{id}` exceeds {} rows", store.rows()),
            ));
        }
        if store.index.insert(id.to_string(), span.clone()).is_some() {
            return Err(corrupt(line_no, format!("duplicate prompt `{id}`")));
        }
        spans.push((span.offset, span.count, line_no));
    }
    spans.sort_unstable();
    for pair in spans.windows(2) {
        if pair[0].0 + pair[0].1 > pair[1].0 {
            return Err(corrupt(pair[1].2, "overlapping spans".into()));
        }
    }
    Ok(store)
}
