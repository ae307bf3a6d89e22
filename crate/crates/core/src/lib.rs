//! Sensor-aware embedding spaces.
//!
//! Numeric sensor readings are mapped into a shared visual embedding space by
//! anchoring range extremes (and any extra reference readings) to text
//! embeddings and interpolating between them with barycentric weights over a
//! Delaunay tessellation of the normalized reading space. On top of that sit a
//! latent-reuse cache that warm-starts an iterative generator from the nearest
//! previously generated reading, and an evaluation toolkit (Kendall's tau,
//! similarity traces, encoder-bias scans, weighted survey scoring).
//!
//! Modules:
//!
//! - [`geometry`]: n-dimensional Delaunay tessellation, point location, barycentric coordinates.
//! - [`embedding`]: embedding algebra and text-to-embedding providers.
//! - [`space`]: sensor schemas, anchors, normalization and reading interpolation.
//! - [`genesis`]: generators, the latent-reuse cache, density dropout, cache benchmarks.
//! - [`eval`]: rank correlation, traces, bias scans, survey scoring and reports.

#![forbid(unsafe_code)]

pub mod embedding;
pub mod eval;
pub mod genesis;
pub mod geometry;
pub mod hash;
mod linalg;
pub mod space;

pub use embedding::{
    blend, cosine_similarity, lerp, Embedding, EmbeddingError, EmbeddingProvider, ProviderError,
    RemoteProvider, SyntheticProvider,
};
pub use genesis::{
    generate, iteration_budget, CacheEntry, GenerationResult, GenesisError, IterationPolicy,
    IterativeGenerator, LatentCache, LatentState, MockGenerator, RemoteGenerator,
};
pub use geometry::{
    delaunay_tessellate, BarycentricCoords, GeometryError, Location, Point, Simplex, Tessellation,
};
pub use space::{
    build_space, AnchorSpec, InterpolationResult, Reading, SensorSchema, SensorSpace, SpaceError,
};
