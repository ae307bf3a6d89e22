//! Generation with latent reuse.
//!
//! A generation either starts cold from `init(seed)` and runs the full
//! iteration count, or warm-starts from the latent of the nearest cached
//! reading and runs a budget that grows with the distance to it.

mod cache;
mod mock;
mod remote;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::{Embedding, ProviderError};
use crate::geometry::Point;
use crate::space::{normalize_reading, Reading, SensorSchema, SensorSpace, SpaceError};

pub use cache::{CacheEntry, LatentCache, LoadReport};
pub use mock::MockGenerator;
pub use remote::RemoteGenerator;

#[derive(Debug, Error)]
pub enum GenesisError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("generator failure: {0}")]
    GeneratorFailure(String),
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("dropout rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("invalid iteration policy: {0}")]
    InvalidPolicy(String),
    #[error("cache capacity must be at least 1")]
    ZeroCapacity,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ProviderError> for GenesisError {
    fn from(e: ProviderError) -> Self {
        GenesisError::Space(SpaceError::Provider(e))
    }
}

/// Intermediate state refined by an iterative generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub values: Vec<f64>,
    pub step_count: u64,
}

impl LatentState {
    pub fn new(values: Vec<f64>) -> Self {
        LatentState {
            values,
            step_count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Opaque generator output; only the digest is ever compared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub bytes: Vec<u8>,
    /// Lowercase hex SHA-256 of `bytes`.
    pub digest: String,
}

impl Artifact {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let digest = hex::encode(Sha256::digest(&bytes));
        Artifact { bytes, digest }
    }
}

pub trait IterativeGenerator: Send + Sync {
    fn latent_dim(&self) -> usize;

    fn init(&self, seed: u64) -> Result<LatentState, GenesisError>;

    /// One refinement step toward `embedding`. Deterministic.
    fn step(
        &self,
        latent: &LatentState,
        embedding: &Embedding,
    ) -> Result<LatentState, GenesisError>;

    fn finalize(&self, latent: &LatentState) -> Result<Artifact, GenesisError>;

    /// Runs `steps` refinements from `start` (or from `init(seed)`) and
    /// finalizes. Backends that do all of this in one call override it.
    fn run(
        &self,
        start: Option<&LatentState>,
        embedding: &Embedding,
        steps: u32,
        seed: u64,
    ) -> Result<(LatentState, Artifact), GenesisError> {
        let mut latent = match start {
            Some(l) => l.clone(),
            None => self.init(seed)?,
        };
        for _ in 0..steps {
            latent = self.step(&latent, embedding)?;
        }
        let artifact = self.finalize(&latent)?;
        Ok((latent, artifact))
    }

    fn id(&self) -> String;
}

impl<G: IterativeGenerator + ?Sized> IterativeGenerator for std::sync::Arc<G> {
    fn latent_dim(&self) -> usize {
        (**self).latent_dim()
    }
    fn init(&self, seed: u64) -> Result<LatentState, GenesisError> {
        (**self).init(seed)
    }
    fn step(&self, l: &LatentState, e: &Embedding) -> Result<LatentState, GenesisError> {
        (**self).step(l, e)
    }
    fn finalize(&self, l: &LatentState) -> Result<Artifact, GenesisError> {
        (**self).finalize(l)
    }
    fn run(
        &self,
        start: Option<&LatentState>,
        e: &Embedding,
        steps: u32,
        seed: u64,
    ) -> Result<(LatentState, Artifact), GenesisError> {
        (**self).run(start, e, steps, seed)
    }
    fn id(&self) -> String {
        (**self).id()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationPolicy {
    pub i_min: u32,
    pub i_max: u32,
    pub i_full: u32,
    /// Largest normalized reading distance that still counts as a hit.
    pub hit_radius: f64,
}

impl Default for IterationPolicy {
    fn default() -> Self {
        IterationPolicy {
            i_min: 2,
            i_max: 10,
            i_full: 50,
            hit_radius: 0.15,
        }
    }
}

impl IterationPolicy {
    pub fn validate(&self) -> Result<(), GenesisError> {
        if !(0 < self.i_min && self.i_min <= self.i_max && self.i_max < self.i_full) {
            return Err(GenesisError::InvalidPolicy(format!(
                "need 0 < i_min <= i_max < i_full, got {}/{}/{}",
                self.i_min, self.i_max, self.i_full
            )));
        }
        if !(self.hit_radius.is_finite() && self.hit_radius > 0.0) {
            return Err(GenesisError::InvalidPolicy(format!(
                "hit radius must be positive, got {}",
                self.hit_radius
            )));
        }
        Ok(())
    }
}

/// Steps to run when warm-starting from a neighbor `distance` away: a linear
/// ramp from `i_min` at 0 to `i_max` at the hit radius, `i_full` beyond it.
pub fn iteration_budget(distance: f64, policy: &IterationPolicy) -> u32 {
    if distance.is_nan() || distance > policy.hit_radius {
        return policy.i_full;
    }
    let span = f64::from(policy.i_max - policy.i_min);
    let x = f64::from(policy.i_min) + span * (distance.max(0.0) / policy.hit_radius);
    // the slack keeps values like 3.0000000000000004 from rounding up
    ((x - 1e-9).ceil() as u32).clamp(policy.i_min, policy.i_max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationResult {
    pub artifact_digest: String,
    pub latent: LatentState,
    pub iterations_used: u32,
    pub cache_hit: bool,
    /// Distance to the nearest cached reading, if the cache was non-empty.
    pub neighbor_distance: Option<f64>,
}

/// Interpolates the reading, runs the generator (warm or cold) and records
/// the result in `cache`.
pub fn generate(
    space: &SensorSpace,
    reading: &Reading,
    cache: &mut LatentCache,
    generator: &dyn IterativeGenerator,
    policy: &IterationPolicy,
    seed: u64,
) -> Result<GenerationResult, GenesisError> {
    policy.validate()?;
    let normalized = space.normalize(reading)?;
    let interp = space.interpolate_point(&normalized.point, normalized.clamped)?;
    generate_at(
        &normalized.point,
        &interp.embedding,
        cache,
        generator,
        policy,
        seed,
    )
}

/// [`generate`] for an already-interpolated embedding.
pub fn generate_at(
    point: &Point,
    embedding: &Embedding,
    cache: &mut LatentCache,
    generator: &dyn IterativeGenerator,
    policy: &IterationPolicy,
    seed: u64,
) -> Result<GenerationResult, GenesisError> {
    let nearest = cache.nearest(point)?;
    let neighbor_distance = nearest.map(|(_, d)| d);
    let warm = nearest.filter(|&(_, d)| d <= policy.hit_radius);

    let (start, steps) = match warm {
        Some((i, d)) => {
            let latent = cache.entries()[i].latent.clone();
            if latent.dim() != generator.latent_dim() {
                return Err(GenesisError::DimensionMismatch {
                    expected: generator.latent_dim(),
                    got: latent.dim(),
                });
            }
            cache.touch(i);
            (Some(latent), iteration_budget(d, policy))
        }
        None => (None, policy.i_full),
    };
    let (latent, artifact) = generator.run(start.as_ref(), embedding, steps, seed)?;
    if latent.dim() != generator.latent_dim() {
        return Err(GenesisError::DimensionMismatch {
            expected: generator.latent_dim(),
            got: latent.dim(),
        });
    }

    let replace = warm.filter(|&(_, d)| d == 0.0).map(|(i, _)| i);
    cache.record(
        replace,
        point.clone(),
        embedding.digest(),
        latent.clone(),
        artifact.digest.clone(),
    )?;

    Ok(GenerationResult {
        artifact_digest: artifact.digest,
        latent,
        iterations_used: steps,
        cache_hit: warm.is_some(),
        neighbor_distance,
    })
}

/// Keeps each item independently with probability `1 - rate`.
pub fn apply_density_dropout<T: Clone>(
    points: &[T],
    rate: f64,
    seed: u64,
) -> Result<Vec<T>, GenesisError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(GenesisError::RateOutOfRange(rate));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(points
        .iter()
        .filter(|_| rng.random::<f64>() >= rate)
        .cloned()
        .collect())
}

/// Default density encoder: one minus the normalized value of `axis`, so a
/// reading at the axis maximum keeps every point.
pub fn density_rate(
    schema: &SensorSchema,
    reading: &Reading,
    axis: &str,
) -> Result<f64, GenesisError> {
    let (k, _) = schema
        .sensor(axis)
        .ok_or_else(|| SpaceError::UnknownSensor(axis.to_string()))?;
    let p = normalize_reading(schema, &reading.values)?;
    Ok(1.0 - p.point.coords()[k])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheBenchReport {
    pub items: usize,
    pub total_iterations_warm: u64,
    pub total_iterations_cold: u64,
    /// `total_iterations_cold / total_iterations_warm`.
    pub speedup: f64,
    pub hit_rate: f64,
    pub mean_iterations_warm: f64,
}

/// Runs the workload with the cache enabled (starting empty) and again with
/// every generation cold, and compares iteration totals.
pub fn bench_cache(
    space: &SensorSpace,
    generator: &dyn IterativeGenerator,
    policy: &IterationPolicy,
    workload: &[Reading],
    seed: u64,
) -> Result<CacheBenchReport, GenesisError> {
    let mut cache = LatentCache::new();
    let (mut warm, mut hits) = (0u64, 0usize);
    for r in workload {
        let g = generate(space, r, &mut cache, generator, policy, seed)?;
        warm += u64::from(g.iterations_used);
        hits += usize::from(g.cache_hit);
    }
    let mut cold = 0u64;
    for r in workload {
        let g = generate(space, r, &mut LatentCache::new(), generator, policy, seed)?;
        cold += u64::from(g.iterations_used);
    }
    let n = workload.len();
    Ok(CacheBenchReport {
        items: n,
        total_iterations_warm: warm,
        total_iterations_cold: cold,
        speedup: if warm == 0 {
            1.0
        } else {
            cold as f64 / warm as f64
        },
        hit_rate: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        mean_iterations_warm: if n == 0 { 0.0 } else { warm as f64 / n as f64 },
    })
}

/// A seeded random walk through the reading box: each reading is `step`
/// (normalized units) from the previous one in a random direction, reflected
/// at the range bounds.
pub fn drift_workload(schema: &SensorSchema, len: usize, step: f64, seed: u64) -> Vec<Reading> {
    let n = schema.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        if i > 0 {
            let dir: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            for (x, d) in p.iter_mut().zip(&dir) {
                let mut y = *x + step * d / norm;
                if y < 0.0 {
                    y = -y;
                }
                if y > 1.0 {
                    y = 2.0 - y;
                }
                *x = y.clamp(0.0, 1.0);
            }
        }
        out.push(Reading::new(
            schema
                .sensors
                .iter()
                .zip(&p)
                .map(|(s, x)| (s.name.clone(), s.min + x * s.span())),
        ));
    }
    out
}
