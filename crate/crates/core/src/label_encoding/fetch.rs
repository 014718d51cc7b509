//! Client for OpenAI-compatible `/v1/embeddings` endpoints.
//!
//! Requests are sent sequentially in batches of `batch_size` inputs. The
//! `index` field of each returned item decides its position; the endpoint is
//! free to return items in any order.

use std::time::Duration;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::table::{table_with_labels, EncodingKind, EncodingTable};
use super::vocabulary::LabelVocabulary;
use crate::error::{Error, Result};

const RESPONSE_LIMIT_BYTES: u64 = 512 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(default, skip_serializing)]
    pub auth_token: Option<String>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_batch_size() -> usize {
    16
}

fn default_timeout_secs() -> u64 {
    120
}

impl EmbeddingEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            auth_token: None,
            batch_size: default_batch_size(),
            timeout_secs: default_timeout_secs(),
        }
    }

    fn url(&self) -> String {
        format!("{}/v1/embeddings", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: usize,
    embedding: Vec<f64>,
}

/// Fetches one embedding per input string, in input order.
pub fn fetch_embeddings(
    endpoint: &EmbeddingEndpointConfig,
    inputs: &[String],
) -> Result<Vec<Vec<f64>>> {
    if endpoint.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
    }
    let config = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs)))
        .build();
    let agent = ureq::Agent::new_with_config(config);
    let url = endpoint.url();

    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(endpoint.batch_size) {
        let body = serde_json::to_string(&EmbeddingRequest {
            model: &endpoint.model_name,
            input: chunk,
        })?;
        let mut request = agent.post(&url).header("Content-Type", "application/json");
        if let Some(token) = &endpoint.auth_token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = request.send(body).map_err(|e| Error::Http(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .with_config()
            .limit(RESPONSE_LIMIT_BYTES)
            .read_to_string()
            .map_err(|e| Error::Http(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(Error::HttpStatus { status, body: text });
        }
        out.extend(align_batch(&text, chunk.len())?);
    }
    Ok(out)
}

/// Orders one response's vectors by their `index` field.
fn align_batch(body: &str, expected: usize) -> Result<Vec<Vec<f64>>> {
    let parsed: EmbeddingResponse =
        serde_json::from_str(body).map_err(|e| Error::BadResponse(e.to_string()))?;
    if parsed.data.len() != expected {
        return Err(Error::CountMismatch {
            expected,
            found: parsed.data.len(),
        });
    }
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; expected];
    for item in parsed.data {
        let slot = slots
            .get_mut(item.index)
            .ok_or_else(|| Error::BadResponse(format!("index {} out of range", item.index)))?;
        if slot.is_some() {
            return Err(Error::BadResponse(format!("index {} repeated", item.index)));
        }
        if item.embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding at index {}", item.index)));
        }
        *slot = Some(item.embedding);
    }
    Ok(slots.into_iter().map(|s| s.expect("all slots filled")).collect())
}

/// Text sent to the endpoint for `label`; `{label}` in the template is
/// replaced by the label string.
pub fn render_prompt(template: &str, label: &str) -> String {
    template.replace("{label}", label)
}

/// Fetches a vector for every vocabulary label and builds a table.
pub fn fetch_table(
    endpoint: &EmbeddingEndpointConfig,
    vocab: &LabelVocabulary,
    prompt_template: &str,
) -> Result<EncodingTable> {
    let inputs: Vec<String> = vocab
        .labels()
        .iter()
        .map(|l| render_prompt(prompt_template, l))
        .collect();
    let vectors = fetch_embeddings(endpoint, &inputs)?;
    let dim = vectors.first().map_or(0, Vec::len);
    let mut matrix = Array2::zeros((vectors.len(), dim));
    for ((label, v), mut row) in vocab.labels().iter().zip(&vectors).zip(matrix.rows_mut()) {
        if v.len() != dim {
            return Err(Error::VectorLengthMismatch {
                label: label.clone(),
                expected: dim,
                found: v.len(),
            });
        }
        row.assign(&ndarray::ArrayView1::from(v.as_slice()));
    }
    table_with_labels(matrix, vocab, EncodingKind::Fetched)
}
