//! Newline-delimited JSON wire protocol between the bridge and a generation
//! backend.
//!
//! ```text
//! → {"id":"p1","text":"a red barn","n_images":16,"temperature":0.85,"cond_scale":3}
//! ← {"id":"p1","images":[{"clip_score":71.2,"embedding":[0.01, ...]}]}
//! ← {"id":"p2","images":[],"error":"safety filter"}
//! ```
//!
//! One response per request; responses may arrive in any order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::mock::{mock_generate, SyntheticOracle};
use super::GenerationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub id: String,
    pub text: String,
    pub n_images: u8,
    pub temperature: f64,
    pub cond_scale: u8,
}

impl GenerationRequest {
    pub fn new(id: &str, text: &str, config: &GenerationConfig) -> Self {
        Self {
            id: id.to_string(),
            text: text.to_string(),
            n_images: config.n_images,
            temperature: config.temperature,
            cond_scale: config.cond_scale,
        }
    }

    fn config(&self) -> GenerationConfig {
        GenerationConfig {
            n_images: self.n_images,
            temperature: self.temperature,
            cond_scale: self.cond_scale,
            ..GenerationConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePayload {
    pub clip_score: f64,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<Vec<ImagePayload>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GenerationResponse {
    pub fn failure(id: impl Into<String>, error: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            images: Some(Vec::new()),
            error: Some(error.into()),
        }
    }
}

pub fn encode<T: Serialize>(message: &T) -> String {
    serde_json::to_string(message).expect("protocol messages always serialize")
}

/// Answers protocol requests from `input` with mock images until EOF.
///
/// A line that does not parse yields an in-band error carrying the request id
/// when one can be recovered, otherwise an empty id.
pub fn serve_mock<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    oracle: &SyntheticOracle,
) -> std::io::Result<usize> {
    let mut served = 0;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<GenerationRequest>(&line) {
            Ok(req) => {
                let records = mock_generate(&req.id, &req.text, &req.config(), oracle);
                GenerationResponse {
                    id: req.id,
                    images: Some(
                        records
                            .into_iter()
                            .map(|r| ImagePayload {
                                clip_score: f64::from(r.clip_score),
                                embedding: r.embedding.into_iter().map(f64::from).collect(),
                            })
                            .collect(),
                    ),
                    error: None,
                }
            }
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(str::to_string))
                    .unwrap_or_default();
                GenerationResponse::failure(id, format!("malformed request: {e}"))
            }
        };
        writeln!(output, "{}", encode(&response))?;
        output.flush()?;
        served += 1;
    }
    Ok(served)
}
