use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{Artifact, GenesisError, IterativeGenerator, LatentState};
use crate::embedding::Embedding;

/// HTTP client for an external iterative generator.
///
/// Every call is `POST {endpoint}/generate` with
/// `{"embedding": [...], "init_latent": [...] | null, "steps": N, "seed": S}`
/// answered by `{"latent": [...], "artifact_b64": "..."}`. `init` sends zero
/// steps and no latent; `finalize` sends zero steps and an empty embedding.
#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    endpoint: String,
    latent_dim: usize,
    timeout: Duration,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    embedding: &'a [f64],
    init_latent: Option<&'a [f64]>,
    steps: u32,
    seed: u64,
}

#[derive(Deserialize)]
struct GenerateResponse {
    latent: Vec<f64>,
    artifact_b64: String,
}

impl RemoteGenerator {
    pub fn new(endpoint: &str, latent_dim: usize) -> Self {
        RemoteGenerator {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            latent_dim,
            timeout: Duration::from_secs(120),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn call(&self, req: &GenerateRequest<'_>) -> Result<(Vec<f64>, Vec<u8>), GenesisError> {
        let unavailable = |e: reqwest::Error| GenesisError::GeneratorUnavailable(e.to_string());
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(unavailable)?;
        let resp = client
            .post(format!("{}/generate", self.endpoint))
            .json(req)
            .send()
            .map_err(unavailable)?;
        if resp.status() != reqwest::StatusCode::OK {
            return Err(GenesisError::GeneratorUnavailable(format!(
                "{}/generate answered {}",
                self.endpoint,
                resp.status()
            )));
        }
        let body: GenerateResponse = resp
            .json()
            .map_err(|e| GenesisError::GeneratorFailure(e.to_string()))?;
        if body.latent.len() != self.latent_dim {
            return Err(GenesisError::DimensionMismatch {
                expected: self.latent_dim,
                got: body.latent.len(),
            });
        }
        if body.latent.iter().any(|v| !v.is_finite()) {
            return Err(GenesisError::GeneratorFailure("non-finite latent".into()));
        }
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(body.artifact_b64)
            .map_err(|e| GenesisError::GeneratorFailure(format!("bad artifact encoding: {e}")))?;
        Ok((body.latent, bytes))
    }
}

impl IterativeGenerator for RemoteGenerator {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn init(&self, seed: u64) -> Result<LatentState, GenesisError> {
        let (latent, _) = self.call(&GenerateRequest {
            embedding: &[],
            init_latent: None,
            steps: 0,
            seed,
        })?;
        Ok(LatentState::new(latent))
    }

    fn step(
        &self,
        latent: &LatentState,
        embedding: &Embedding,
    ) -> Result<LatentState, GenesisError> {
        let (values, _) = self.call(&GenerateRequest {
            embedding: embedding.values(),
            init_latent: Some(&latent.values),
            steps: 1,
            seed: 0,
        })?;
        Ok(LatentState {
            values,
            step_count: latent.step_count + 1,
        })
    }

    fn finalize(&self, latent: &LatentState) -> Result<Artifact, GenesisError> {
        let (_, bytes) = self.call(&GenerateRequest {
            embedding: &[],
            init_latent: Some(&latent.values),
            steps: 0,
            seed: 0,
        })?;
        Ok(Artifact::from_bytes(bytes))
    }

    fn run(
        &self,
        start: Option<&LatentState>,
        embedding: &Embedding,
        steps: u32,
        seed: u64,
    ) -> Result<(LatentState, Artifact), GenesisError> {
        let (values, bytes) = self.call(&GenerateRequest {
            embedding: embedding.values(),
            init_latent: start.map(|l| l.values.as_slice()),
            steps,
            seed,
        })?;
        let base = start.map_or(0, |l| l.step_count);
        Ok((
            LatentState {
                values,
                step_count: base + u64::from(steps),
            },
            Artifact::from_bytes(bytes),
        ))
    }

    fn id(&self) -> String {
        format!("remote:{}:{}", self.endpoint, self.latent_dim)
    }
}
