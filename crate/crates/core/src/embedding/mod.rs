//! Embedding vectors and text-to-embedding providers.
//!
//! Blending works on raw vectors; normalization only happens inside
//! [`cosine_similarity`].

mod codec;
mod remote;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{read_embeddings, write_embeddings};
pub use remote::RemoteProvider;
pub use synthetic::SyntheticProvider;

/// Tolerance on `sum(weights) == 1` accepted by [`blend`].
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("embedding lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("nothing to blend")]
    Empty,
    #[error("non-finite embedding component")]
    NonFinite,
    #[error("malformed embedding file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("embedding provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider returned {got}-dimensional embeddings, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("provider returned {got} embeddings for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
}

/// A dense vector in the shared visual space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Embedding(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rounds every component to the nearest `f32`, the precision embeddings
    /// are stored at.
    pub fn quantized(&self) -> Embedding {
        Embedding(self.0.iter().map(|&v| f64::from(v as f32)).collect())
    }

    /// Stable 64-bit digest of the `f32` encoding.
    pub fn digest(&self) -> u64 {
        crate::hash::digest_f32(&self.0)
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = EmbeddingError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Embedding::new(v)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

/// Turns texts into embeddings.
///
/// Implementations must be deterministic: the same text yields the same
/// embedding for the lifetime of the provider.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError>;

    fn dim(&self) -> usize;

    /// Identifier recorded in every space built with this provider.
    fn id(&self) -> String;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<P> {
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        (**self).embed(texts)
    }

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

fn check_len(a: &Embedding, b: &Embedding) -> Result<(), EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::LengthMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

/// `a . b / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, EmbeddingError> {
    check_len(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Affine combination `sum w_i E_i`.
pub fn blend<E>(embeddings: &[E], weights: &[f64]) -> Result<Embedding, EmbeddingError>
where
    E: AsRef<Embedding>,
{
    if embeddings.is_empty() {
        return Err(EmbeddingError::Empty);
    }
    if embeddings.len() != weights.len() {
        return Err(EmbeddingError::LengthMismatch(
            embeddings.len(),
            weights.len(),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(EmbeddingError::WeightsNotNormalized(sum));
    }
    let first = embeddings[0].as_ref();
    let mut out = vec![0.0; first.dim()];
    for (e, &w) in embeddings.iter().zip(weights) {
        let e = e.as_ref();
        check_len(first, e)?;
        for (o, v) in out.iter_mut().zip(&e.0) {
            *o += w * v;
        }
    }
    Ok(Embedding(out))
}

/// `(1 - t) a + t b`.
pub fn lerp(a: &Embedding, b: &Embedding, t: f64) -> Result<Embedding, EmbeddingError> {
    check_len(a, b)?;
    blend(&[a, b], &[1.0 - t, t])
}

impl AsRef<Embedding> for Embedding {
    fn as_ref(&self) -> &Embedding {
        self
    }
}
