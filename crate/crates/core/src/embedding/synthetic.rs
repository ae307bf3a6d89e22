use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Embedding, EmbeddingProvider, ProviderError};
use crate::hash::{fnv1a64, splitmix64};

/// Offline provider: each text maps to a pseudo-random unit vector drawn from
/// a ChaCha stream keyed by `(seed, fnv1a64(text))`. Output is identical
/// across runs and platforms. Safe for concurrent use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticProvider {
    seed: u64,
    dim: usize,
}

impl SyntheticProvider {
    /// Embedding size of the offline test profile.
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim >= 2, "embedding dimension must be at least 2");
        SyntheticProvider { seed, dim }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn embed_one(&self, text: &str) -> Embedding {
        let key = splitmix64(self.seed) ^ fnv1a64(text.as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        loop {
            let v: Vec<f64> = (0..self.dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                return Embedding(v.into_iter().map(|x| x / norm).collect());
            }
        }
    }
}

impl Default for SyntheticProvider {
    fn default() -> Self {
        SyntheticProvider::new(0, Self::DEFAULT_DIM)
    }
}

impl EmbeddingProvider for SyntheticProvider {
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("synthetic:{}:{}", self.seed, self.dim)
    }
}
