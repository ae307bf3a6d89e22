use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Embedding, EmbeddingProvider, ProviderError};

/// HTTP client for an external text encoder.
///
/// Sends `POST {endpoint}/embed` with `{"texts": [...]}` and expects
/// `{"dim": D, "embeddings": [[...], ...]}`. Any transport failure or non-200
/// status is reported as [`ProviderError::Unavailable`].
///
/// A fresh blocking client is created per call, so the provider can be
/// created and dropped from async code; calls themselves block.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    endpoint: String,
    dim: usize,
    timeout: Duration,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    embeddings: Vec<Vec<f64>>,
}

impl RemoteProvider {
    /// Embedding size of the remote profile.
    pub const DEFAULT_DIM: usize = 768;

    pub fn new(endpoint: &str, dim: usize) -> Self {
        RemoteProvider {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            dim,
            timeout: Duration::from_secs(30),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        let unavailable = |e: reqwest::Error| ProviderError::Unavailable(e.to_string());
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(unavailable)?;
        let resp = client
            .post(format!("{}/embed", self.endpoint))
            .json(&EmbedRequest { texts })
            .send()
            .map_err(unavailable)?;
        if resp.status() != reqwest::StatusCode::OK {
            return Err(ProviderError::Unavailable(format!(
                "{}/embed answered {}",
                self.endpoint,
                resp.status()
            )));
        }
        let body: EmbedResponse = resp.json().map_err(unavailable)?;
        if body.dim != self.dim {
            return Err(ProviderError::DimensionMismatch {
                expected: self.dim,
                got: body.dim,
            });
        }
        if body.embeddings.len() != texts.len() {
            return Err(ProviderError::CountMismatch {
                expected: texts.len(),
                got: body.embeddings.len(),
            });
        }
        body.embeddings
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(ProviderError::DimensionMismatch {
                        expected: self.dim,
                        got: v.len(),
                    });
                }
                Embedding::new(v).map_err(|e| ProviderError::Unavailable(e.to_string()))
            })
            .collect()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("remote:{}:{}", self.endpoint, self.dim)
    }
}
