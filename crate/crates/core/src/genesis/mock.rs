use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Artifact, GenesisError, IterativeGenerator, LatentState};
use crate::embedding::Embedding;
use crate::hash::splitmix64;

/// Closed-form stand-in for an iterative generator.
///
/// The target for an embedding `E` is `T(E) = normalize(M E)` with a fixed
/// seeded `M`; each step moves the latent half way to the target, so after
/// `k` steps the residual is `0.5^k` of the starting one.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    seed: u64,
    embedding_dim: usize,
    latent_dim: usize,
    /// Row-major `latent_dim x embedding_dim`.
    mixing: Vec<f64>,
}

impl MockGenerator {
    pub const STEP_SIZE: f64 = 0.5;

    pub fn new(seed: u64, embedding_dim: usize, latent_dim: usize) -> Self {
        assert!(embedding_dim > 0 && latent_dim > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let mixing = (0..latent_dim * embedding_dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        MockGenerator {
            seed,
            embedding_dim,
            latent_dim,
            mixing,
        }
    }

    pub fn target(&self, embedding: &Embedding) -> Result<Vec<f64>, GenesisError> {
        let e = embedding.values();
        if e.len() != self.embedding_dim {
            return Err(GenesisError::DimensionMismatch {
                expected: self.embedding_dim,
                got: e.len(),
            });
        }
        let t: Vec<f64> = self
            .mixing
            .chunks_exact(self.embedding_dim)
            .map(|row| row.iter().zip(e).map(|(a, b)| a * b).sum())
            .collect();
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(GenesisError::GeneratorFailure(
                "embedding maps to a zero target".into(),
            ));
        }
        Ok(t.into_iter().map(|x| x / norm).collect())
    }
}

impl IterativeGenerator for MockGenerator {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn init(&self, seed: u64) -> Result<LatentState, GenesisError> {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ splitmix64(seed)));
        Ok(LatentState::new(
            (0..self.latent_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        ))
    }

    fn step(
        &self,
        latent: &LatentState,
        embedding: &Embedding,
    ) -> Result<LatentState, GenesisError> {
        if latent.dim() != self.latent_dim {
            return Err(GenesisError::DimensionMismatch {
                expected: self.latent_dim,
                got: latent.dim(),
            });
        }
        let t = self.target(embedding)?;
        Ok(LatentState {
            values: latent
                .values
                .iter()
                .zip(&t)
                .map(|(l, t)| l + Self::STEP_SIZE * (t - l))
                .collect(),
            step_count: latent.step_count + 1,
        })
    }

    fn finalize(&self, latent: &LatentState) -> Result<Artifact, GenesisError> {
        let bytes = latent
            .values
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect();
        Ok(Artifact::from_bytes(bytes))
    }

    fn id(&self) -> String {
        format!(
            "mock:{}:{}x{}",
            self.seed, self.latent_dim, self.embedding_dim
        )
    }
}
