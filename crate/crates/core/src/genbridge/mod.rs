//! Obtains per-image CLIP scores and embeddings for prompts from a pluggable
//! backend, with a digest-checked cache and bounded retries.

mod backend;
mod mock;
pub mod protocol;
mod store;

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::time::Duration;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use backend::{
    Backend, BackendError, BackendSpec, MockBackend, ResponseLine, StdioBackend, TcpBackend,
};
pub use mock::{mock_generate, Dispersion, Profile, SyntheticOracle};
pub use protocol::{GenerationRequest, GenerationResponse, ImagePayload};
pub use store::{hex, index_path, load_store, save_store, ImageStore, Span, StoreError};

use crate::corpus::Prompt;

pub const MAX_IMAGES: u8 = 16;
pub const DEFAULT_DIM: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub n_images: u8,
    pub temperature: f64,
    pub cond_scale: u8,
    pub model_tag: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n_images: MAX_IMAGES,
            temperature: 0.85,
            cond_scale: 3,
            model_tag: "mini-1:v0".into(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=MAX_IMAGES).contains(&self.n_images) {
            return Err(format!(
                "n_images {} outside 1..={MAX_IMAGES}",
                self.n_images
            ));
        }
        if !(1..=10).contains(&self.cond_scale) {
            return Err(format!("cond_scale {} outside 1..=10", self.cond_scale));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(format!("temperature {} must be positive", self.temperature));
        }
        Ok(())
    }

    /// Cache key for one prompt under this configuration.
    pub fn request_digest(&self, text: &str) -> String {
        let mut h = Sha256::new();
        for part in [
            text,
            &self.n_images.to_string(),
            &self.temperature.to_string(),
            &self.cond_scale.to_string(),
            &self.model_tag,
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex(&h.finalize()[..16])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub prompt_id: String,
    pub image_index: usize,
    pub clip_score: f32,
    pub embedding: Vec<f32>,
}

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("backend {backend} unavailable after {attempts} attempts: {reason}")]
    BackendUnavailable {
        backend: String,
        attempts: u32,
        reason: String,
    },
    #[error("prompt `{prompt_id}`: embedding has {got} values, store expects {expected}")]
    DimensionMismatch {
        prompt_id: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureReason {
    EmptyPrompt,
    NoImages,
    Rejected(String),
    NoResponse,
    ProtocolViolation(String),
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureReason::EmptyPrompt => f.write_str("empty prompt, not sent"),
            FailureReason::NoImages => f.write_str("backend returned no images"),
            FailureReason::Rejected(e) => write!(f, "backend error: {e}"),
            FailureReason::NoResponse => f.write_str("no response for id"),
            FailureReason::ProtocolViolation(e) => write!(f, "protocol violation: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub prompt_id: String,
    pub reason: FailureReason,
}

#[derive(Debug, Clone)]
pub struct BridgeOptions {
    pub dim: usize,
    /// Attempts per prompt and per transport failure.
    pub retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
    /// Partial store saved after every batch.
    pub checkpoint: Option<PathBuf>,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            retries: 3,
            backoff: Duration::from_millis(250),
            max_in_flight: 32,
            checkpoint: None,
        }
    }
}

#[derive(Debug)]
pub struct GenerationReport {
    pub store: ImageStore,
    pub failures: Vec<Failure>,
    /// Prompts with text, i.e. everything except empty prompts.
    pub requested: usize,
    pub cache_hits: usize,
    /// Request lines sent, retries included.
    pub backend_requests: usize,
}

impl GenerationReport {
    pub fn hit_rate(&self) -> f64 {
        if self.requested == 0 {
            1.0
        } else {
            self.cache_hits as f64 / self.requested as f64
        }
    }
}

type Rows = Vec<(f32, Vec<f32>)>;

enum Verdict {
    Stored(Rows),
    Retry(FailureReason),
    Failed(FailureReason),
}

fn judge(
    resp: GenerationResponse,
    config: &GenerationConfig,
    dim: usize,
) -> Result<Verdict, BridgeError> {
    if let Some(err) = resp.error {
        return Ok(Verdict::Retry(FailureReason::Rejected(err)));
    }
    let violation = |m: String| Ok(Verdict::Failed(FailureReason::ProtocolViolation(m)));
    let Some(images) = resp.images else {
        return violation("response has neither images nor error".into());
    };
    if images.len() > usize::from(config.n_images) {
        return violation(format!(
            "{} images returned, {} requested",
            images.len(),
            config.n_images
        ));
    }
    if images.is_empty() {
        return Ok(Verdict::Failed(FailureReason::NoImages));
    }
    let mut rows = Vec::with_capacity(images.len());
    for (i, img) in images.into_iter().enumerate() {
        if img.embedding.len() != dim {
            return Err(BridgeError::DimensionMismatch {
                prompt_id: resp.id,
                expected: dim,
                got: img.embedding.len(),
            });
        }
        if !(0.0..=100.0).contains(&img.clip_score) {
            return violation(format!(
                "image {i}: clip_score {} outside [0,100]",
                img.clip_score
            ));
        }
        if img.embedding.iter().any(|x| !x.is_finite()) {
            return violation(format!("image {i}: non-finite embedding value"));
        }
        rows.push((
            img.clip_score as f32,
            img.embedding.into_iter().map(|x| x as f32).collect(),
        ));
    }
    Ok(Verdict::Stored(rows))
}

struct Run<'a> {
    prompts: Vec<&'a Prompt>,
    config: &'a GenerationConfig,
    options: &'a BridgeOptions,
    cache: Option<&'a ImageStore>,
    digests: HashMap<&'a str, String>,
    fresh: HashMap<String, Rows>,
}

impl Run<'_> {
    fn assemble(&self) -> Result<ImageStore, StoreError> {
        let mut store = ImageStore::new(self.options.dim);
        for p in &self.prompts {
            if let Some(rows) = self.fresh.get(&p.id) {
                let refs: Vec<(f32, &[f32])> =
                    rows.iter().map(|(s, e)| (*s, e.as_slice())).collect();
                store.insert(&p.id, &self.digests[p.id.as_str()], &refs)?;
            } else if let Some(cache) = self.cache {
                if self.is_cached(p) {
                    store.copy_from(cache, &p.id)?;
                }
            }
        }
        Ok(store)
    }

    fn is_cached(&self, p: &Prompt) -> bool {
        self.cache
            .and_then(|c| c.span(&p.id))
            .is_some_and(|s| s.digest == self.digests[p.id.as_str()])
    }

    fn checkpoint(&self) -> Result<(), BridgeError> {
        if let Some(path) = &self.options.checkpoint {
            save_store(&self.assemble()?, path)?;
        }
        Ok(())
    }
}

/// Fetches images for every prompt not already in `cache` under the same
/// request digest. The returned store lists prompts in input order, so a
/// fully cached rerun reproduces the previous store exactly.
pub fn request_images(
    prompts: &[Prompt],
    config: &GenerationConfig,
    backend: &mut dyn Backend,
    options: &BridgeOptions,
    cache: Option<&ImageStore>,
) -> Result<GenerationReport, BridgeError> {
    config.validate().map_err(BridgeError::Config)?;
    let cache = cache.filter(|c| {
        let usable = c.dim() == options.dim;
        if !usable {
            warn!(
                "ignoring cache of dimension {} (want {})",
                c.dim(),
                options.dim
            );
        }
        usable
    });
    let mut seen = HashSet::new();
    let unique: Vec<&Prompt> = prompts
        .iter()
        .filter(|p| {
            let fresh = seen.insert(p.id.as_str());
            if !fresh {
                warn!("duplicate prompt id `{}` ignored", p.id);
            }
            fresh
        })
        .collect();
    let digests = unique
        .iter()
        .map(|p| (p.id.as_str(), config.request_digest(&p.text)))
        .collect();
    let mut run = Run {
        prompts: unique,
        config,
        options,
        cache,
        digests,
        fresh: HashMap::new(),
    };

    let mut failures = Vec::new();
    let mut pending = Vec::new();
    let mut cache_hits = 0;
    for p in &run.prompts {
        if p.text.trim().is_empty() {
            failures.push(Failure {
                prompt_id: p.id.clone(),
                reason: FailureReason::EmptyPrompt,
            });
        } else if run.is_cached(p) {
            cache_hits += 1;
        } else {
            pending.push(*p);
        }
    }
    let requested = run.prompts.len() - failures.len();
    info!(
        "{} prompts: {cache_hits} cached, {} to generate via {}",
        requested,
        pending.len(),
        backend.describe()
    );

    let mut backend_requests = 0;
    for chunk in pending.chunks(options.max_in_flight.max(1)) {
        let (stored, failed, sent) = run_batch(chunk, run.config, backend, options)?;
        backend_requests += sent;
        failures.extend(failed);
        run.fresh.extend(stored);
        run.checkpoint()?;
    }

    let order: HashMap<&str, usize> = run
        .prompts
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    failures.sort_by_key(|f| order[f.prompt_id.as_str()]);
    for f in &failures {
        debug!("prompt `{}` failed: {}", f.prompt_id, f.reason);
    }
    Ok(GenerationReport {
        store: run.assemble()?,
        failures,
        requested,
        cache_hits,
        backend_requests,
    })
}

type BatchOutcome = (Vec<(String, Rows)>, Vec<Failure>, usize);

fn run_batch(
    chunk: &[&Prompt],
    config: &GenerationConfig,
    backend: &mut dyn Backend,
    options: &BridgeOptions,
) -> Result<BatchOutcome, BridgeError> {
    let retries = options.retries.max(1);
    let mut stored = Vec::new();
    let mut failed = Vec::new();
    let mut sent = 0;
    let mut attempts: HashMap<&str, u32> = HashMap::new();
    let mut queue: Vec<&Prompt> = chunk.to_vec();
    let mut transport_failures = 0;
    let mut round = 0;
    while !queue.is_empty() {
        let requests: Vec<GenerationRequest> = queue
            .iter()
            .map(|p| GenerationRequest::new(&p.id, &p.text, config))
            .collect();
        sent += requests.len();
        let lines = match backend.exchange(&requests) {
            Ok(lines) => lines,
            Err(e) => {
                transport_failures += 1;
                warn!("backend attempt {transport_failures}/{retries} failed: {e}");
                if transport_failures >= retries {
                    return Err(BridgeError::BackendUnavailable {
                        backend: backend.describe(),
                        attempts: transport_failures,
                        reason: e.0,
                    });
                }
                std::thread::sleep(options.backoff * 2u32.pow(transport_failures - 1));
                if let Err(e) = backend.reconnect() {
                    warn!("reconnect failed: {e}");
                }
                continue;
            }
        };
        transport_failures = 0;
        let mut by_id: HashMap<String, GenerationResponse> = HashMap::new();
        for line in lines {
            match line {
                Ok(resp) => {
                    if by_id.contains_key(&resp.id) {
                        warn!("duplicate response for `{}` ignored", resp.id);
                    } else {
                        by_id.insert(resp.id.clone(), resp);
                    }
                }
                Err(raw) => warn!("unparseable response line: {raw}"),
            }
        }
        let mut retry = Vec::new();
        for p in queue {
            let n = attempts.entry(p.id.as_str()).or_insert(0);
            *n += 1;
            let verdict = match by_id.remove(&p.id) {
                None => Verdict::Retry(FailureReason::NoResponse),
                Some(resp) => judge(resp, config, options.dim)?,
            };
            match verdict {
                Verdict::Stored(rows) => stored.push((p.id.clone(), rows)),
                Verdict::Retry(reason) if *n < retries => {
                    debug!("retrying `{}` ({reason})", p.id);
                    retry.push(p);
                }
                Verdict::Retry(reason) | Verdict::Failed(reason) => failed.push(Failure {
                    prompt_id: p.id.clone(),
                    reason,
                }),
            }
        }
        for id in by_id.keys() {
            warn!("response for unknown id `{id}` ignored");
        }
        if !retry.is_empty() {
            std::thread::sleep(options.backoff * 2u32.pow(round.min(8)));
            round += 1;
        }
        queue = retry;
    }
    Ok((stored, failed, sent))
}
