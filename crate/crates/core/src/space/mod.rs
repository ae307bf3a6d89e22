//! Sensor schemas, anchors and reading interpolation.
//!
//! A [`SensorSpace`] pairs anchor readings with embeddings. Every range
//! corner is an anchor, so after clamping each reading lies inside the hull
//! of the anchor points. A reading's embedding is the barycentric blend of the
//! anchors of its containing simplex (or, with a single sensor, the linear
//! blend of the two neighboring anchors).
//!
//! Spaces are immutable; [`SensorSpace::add_anchor`] returns a new one.

mod schema;

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{blend, Embedding, EmbeddingError, EmbeddingProvider, ProviderError};
use crate::geometry::{self, GeometryError, Location, Point, Tessellation};

pub use schema::{SchemaContext, SensorSchema, SensorSpec};

/// Normalized distance under which two anchor readings count as the same.
const DUPLICATE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("{0} sensors declared, at most {max} supported", max = geometry::MAX_DIMENSION)]
    TooManySensors(usize),
    #[error("unknown sensor {0:?}")]
    UnknownSensor(String),
    #[error("reading is missing sensor {0:?}")]
    MissingSensor(String),
    #[error("sensor {0:?} has a non-finite value")]
    NonFiniteValue(String),
    #[error("anchor value {value} for {sensor:?} is outside the declared range")]
    AnchorOutOfRange { sensor: String, value: f64 },
    #[error("an anchor already exists at this reading")]
    DuplicateAnchorReading,
    #[error("anchor embeddings have dimension {got}, space uses {expected}")]
    EmbeddingDimension { expected: usize, got: usize },
    #[error("reading lies outside the anchor hull")]
    OutsideHull,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A sensor reading in native units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reading {
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl Reading {
    pub fn new<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        Reading {
            values: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            timestamp: None,
        }
    }
}

// Accepts either `{"values": {...}, "timestamp": ...}` or a flat map of
// sensor name to value.
impl<'de> Deserialize<'de> for Reading {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wrapped {
            values: BTreeMap<String, f64>,
            #[serde(default)]
            timestamp: Option<Timestamp>,
        }
        // unix times arrive as numbers, ISO times as strings
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Timestamp {
            Text(String),
            Number(serde_json::Number),
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Form {
            Wrapped(Wrapped),
            Flat(BTreeMap<String, f64>),
        }
        match Form::deserialize(d).map_err(|_| {
            serde::de::Error::custom("expected a map of sensor values or {\"values\": {...}}")
        })? {
            Form::Wrapped(w) => Ok(Reading {
                values: w.values,
                timestamp: w.timestamp.map(|t| match t {
                    Timestamp::Text(s) => s,
                    Timestamp::Number(n) => n.to_string(),
                }),
            }),
            Form::Flat(values) => Ok(Reading {
                values,
                timestamp: None,
            }),
        }
    }
}

/// A reference reading. Without an explicit embedding the anchor is
/// embedded from the schema's prompt template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub reading: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding>,
}

impl AnchorSpec {
    pub fn prompt_derived(reading: BTreeMap<String, f64>) -> Self {
        AnchorSpec {
            reading,
            embedding: None,
        }
    }

    pub fn explicit(reading: BTreeMap<String, f64>, embedding: Embedding) -> Self {
        AnchorSpec {
            reading,
            embedding: Some(embedding),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub spec: AnchorSpec,
    pub point: Point,
    pub embedding: Embedding,
    /// Rendered prompt, for prompt-derived anchors.
    pub prompt: Option<String>,
    pub corner: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    /// One sensor: anchor ids ordered by coordinate.
    Segments(Vec<usize>),
    Simplices(Tessellation),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedReading {
    pub point: Point,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationResult {
    pub embedding: Embedding,
    /// Blend weights, aligned with `anchor_ids`.
    pub weights: Vec<f64>,
    pub anchor_ids: Vec<usize>,
    /// Simplex id, or segment index for single-sensor spaces.
    pub simplex_id: usize,
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub struct SensorSpace {
    schema: SensorSchema,
    anchors: Vec<Anchor>,
    structure: Structure,
    provider_id: String,
    built_at: u64,
}

/// Identity of a space: everything except the build time.
impl PartialEq for SensorSpace {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.anchors == other.anchors
            && self.structure == other.structure
            && self.provider_id == other.provider_id
    }
}

/// Maps a reading onto `[0, 1]^n`, clamping out-of-range axes.
pub fn normalize_reading(
    schema: &SensorSchema,
    values: &BTreeMap<String, f64>,
) -> Result<NormalizedReading, SpaceError> {
    if let Some(k) = values.keys().find(|k| schema.sensor(k).is_none()) {
        return Err(SpaceError::UnknownSensor(k.clone()));
    }
    let mut clamped = false;
    let mut coords = Vec::with_capacity(schema.dim());
    for s in &schema.sensors {
        let v = *values
            .get(&s.name)
            .ok_or_else(|| SpaceError::MissingSensor(s.name.clone()))?;
        if !v.is_finite() {
            return Err(SpaceError::NonFiniteValue(s.name.clone()));
        }
        let x = (v - s.min) / s.span();
        if !(0.0..=1.0).contains(&x) {
            clamped = true;
        }
        coords.push(x.clamp(0.0, 1.0));
    }
    Ok(NormalizedReading {
        point: Point::new(coords),
        clamped,
    })
}

/// Orders the anchors of a space: the `2^n` range corners first (bit `k` of
/// the corner index selects the max of sensor `k`), then the remaining
/// extras in the order given. An extra that sits on a corner replaces the
/// synthesized corner anchor.
pub fn anchor_plan(
    schema: &SensorSchema,
    extras: &[AnchorSpec],
) -> Result<Vec<(AnchorSpec, bool)>, SpaceError> {
    schema.validate()?;
    let n = schema.dim();
    let mut extra_points = Vec::with_capacity(extras.len());
    for spec in extras {
        check_anchor_range(schema, spec)?;
        let p = normalize_reading(schema, &spec.reading)?.point;
        if extra_points
            .iter()
            .any(|q: &Point| q.distance(&p) <= DUPLICATE_EPSILON)
        {
            return Err(SpaceError::DuplicateAnchorReading);
        }
        extra_points.push(p);
    }
    let mut used = vec![false; extras.len()];
    let mut plan = Vec::with_capacity((1 << n) + extras.len());
    for mask in 0..1usize << n {
        let coords: Vec<f64> = (0..n).map(|k| ((mask >> k) & 1) as f64).collect();
        let corner = Point::new(coords);
        match extra_points
            .iter()
            .position(|p| p.distance(&corner) <= DUPLICATE_EPSILON)
        {
            Some(i) => {
                used[i] = true;
                plan.push((extras[i].clone(), true));
            }
            None => {
                let reading = schema
                    .sensors
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let v = if (mask >> k) & 1 == 1 { s.max } else { s.min };
                        (s.name.clone(), v)
                    })
                    .collect();
                plan.push((AnchorSpec::prompt_derived(reading), true));
            }
        }
    }
    for (i, spec) in extras.iter().enumerate() {
        if !used[i] {
            plan.push((spec.clone(), false));
        }
    }
    Ok(plan)
}

fn check_anchor_range(schema: &SensorSchema, spec: &AnchorSpec) -> Result<(), SpaceError> {
    for s in &schema.sensors {
        if let Some(&v) = spec.reading.get(&s.name) {
            if !v.is_finite() {
                return Err(SpaceError::NonFiniteValue(s.name.clone()));
            }
            if v < s.min || v > s.max {
                return Err(SpaceError::AnchorOutOfRange {
                    sensor: s.name.clone(),
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Embeds every prompt-derived anchor in one provider call.
fn resolve_embeddings(
    schema: &SensorSchema,
    plan: &[(AnchorSpec, bool)],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<(Embedding, Option<String>)>, SpaceError> {
    let mut prompts = Vec::new();
    for (spec, _) in plan {
        if spec.embedding.is_none() {
            prompts.push(schema.render_prompt(&spec.reading)?);
        }
    }
    let mut embedded = if prompts.is_empty() {
        Vec::new()
    } else {
        let out = provider.embed(&prompts)?;
        if out.len() != prompts.len() {
            return Err(ProviderError::CountMismatch {
                expected: prompts.len(),
                got: out.len(),
            }
            .into());
        }
        out
    }
    .into_iter()
    .zip(prompts);
    Ok(plan
        .iter()
        .map(|(spec, _)| match &spec.embedding {
            Some(e) => (e.clone(), None),
            None => {
                let (e, p) = embedded.next().expect("one embedding per prompt");
                (e, Some(p))
            }
        })
        .collect())
}

/// Builds a space from a schema, optional extra anchors and a provider.
pub fn build_space(
    schema: &SensorSchema,
    extras: &[AnchorSpec],
    provider: &dyn EmbeddingProvider,
) -> Result<SensorSpace, SpaceError> {
    let plan = anchor_plan(schema, extras)?;
    let embeddings = resolve_embeddings(schema, &plan, provider)?;
    SensorSpace::assemble(schema.clone(), plan, embeddings, provider.id())
}

impl SensorSpace {
    /// Builds a space from an [`anchor_plan`] and one embedding per planned
    /// anchor, without calling a provider. Embeddings are stored at `f32`
    /// precision.
    pub fn assemble(
        schema: SensorSchema,
        plan: Vec<(AnchorSpec, bool)>,
        embeddings: Vec<(Embedding, Option<String>)>,
        provider_id: String,
    ) -> Result<Self, SpaceError> {
        schema.validate()?;
        if plan.len() != embeddings.len() {
            return Err(ProviderError::CountMismatch {
                expected: plan.len(),
                got: embeddings.len(),
            }
            .into());
        }
        let dim = embeddings.first().map_or(0, |(e, _)| e.dim());
        if dim < 2 {
            return Err(SpaceError::EmbeddingDimension {
                expected: 2,
                got: dim,
            });
        }
        let mut anchors = Vec::with_capacity(plan.len());
        for ((spec, corner), (embedding, prompt)) in plan.into_iter().zip(embeddings) {
            if embedding.dim() != dim {
                return Err(SpaceError::EmbeddingDimension {
                    expected: dim,
                    got: embedding.dim(),
                });
            }
            let point = normalize_reading(&schema, &spec.reading)?.point;
            anchors.push(Anchor {
                spec,
                point,
                embedding: embedding.quantized(),
                prompt,
                corner,
            });
        }
        let structure = if schema.dim() == 1 {
            let mut order: Vec<usize> = (0..anchors.len()).collect();
            order.sort_by(|&a, &b| {
                anchors[a].point.coords()[0].total_cmp(&anchors[b].point.coords()[0])
            });
            Structure::Segments(order)
        } else {
            let points: Vec<Point> = anchors.iter().map(|a| a.point.clone()).collect();
            Structure::Simplices(geometry::delaunay_tessellate(&points)?)
        };
        let built_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Ok(SensorSpace {
            schema,
            anchors,
            structure,
            provider_id,
            built_at,
        })
    }

    pub fn schema(&self) -> &SensorSchema {
        &self.schema
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn tessellation(&self) -> Option<&Tessellation> {
        match &self.structure {
            Structure::Simplices(t) => Some(t),
            Structure::Segments(_) => None,
        }
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn built_at(&self) -> u64 {
        self.built_at
    }

    pub fn dim(&self) -> usize {
        self.schema.dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.anchors[0].embedding.dim()
    }

    /// Number of simplices (segments when there is a single sensor).
    pub fn cell_count(&self) -> usize {
        match &self.structure {
            Structure::Segments(order) => order.len() - 1,
            Structure::Simplices(t) => t.len(),
        }
    }

    /// The extra (non-corner) anchors plus any corner overrides, i.e. what a
    /// caller has to hand back to [`build_space`] to rebuild this space.
    pub fn user_anchors(&self) -> Vec<AnchorSpec> {
        self.anchors
            .iter()
            .filter(|a| !a.corner || a.spec.embedding.is_some())
            .map(|a| a.spec.clone())
            .collect()
    }

    pub fn normalize(&self, reading: &Reading) -> Result<NormalizedReading, SpaceError> {
        normalize_reading(&self.schema, &reading.values)
    }

    pub fn interpolate(&self, reading: &Reading) -> Result<InterpolationResult, SpaceError> {
        let NormalizedReading { point, clamped } = self.normalize(reading)?;
        self.interpolate_point(&point, clamped)
    }

    /// Interpolates at an already-normalized point.
    pub fn interpolate_point(
        &self,
        point: &Point,
        clamped: bool,
    ) -> Result<InterpolationResult, SpaceError> {
        let (simplex_id, anchor_ids, weights) = match &self.structure {
            Structure::Segments(order) => {
                let x = point.coords()[0];
                let coord = |i: usize| self.anchors[order[i]].point.coords()[0];
                let seg = (0..order.len() - 1)
                    .find(|&i| coord(i) <= x && x <= coord(i + 1))
                    .ok_or(SpaceError::OutsideHull)?;
                let (lo, hi) = (coord(seg), coord(seg + 1));
                let t = (x - lo) / (hi - lo);
                (seg, vec![order[seg], order[seg + 1]], vec![1.0 - t, t])
            }
            Structure::Simplices(tess) => {
                let Location::Inside(id) = tess.locate_simplex(point)? else {
                    return Err(SpaceError::OutsideHull);
                };
                let bc = tess.barycentric_coordinates(id, point)?;
                (id, tess.simplices()[id].vertices().to_vec(), bc.weights)
            }
        };
        let embeddings: Vec<&Embedding> = anchor_ids
            .iter()
            .map(|&i| &self.anchors[i].embedding)
            .collect();
        let embedding = blend(&embeddings, &weights)?;
        Ok(InterpolationResult {
            embedding,
            weights,
            anchor_ids,
            simplex_id,
            clamped,
        })
    }

    /// Returns a new space with one more anchor and a rebuilt tessellation.
    pub fn add_anchor(
        &self,
        spec: AnchorSpec,
        provider: &dyn EmbeddingProvider,
    ) -> Result<SensorSpace, SpaceError> {
        check_anchor_range(&self.schema, &spec)?;
        let point = normalize_reading(&self.schema, &spec.reading)?.point;
        if self
            .anchors
            .iter()
            .any(|a| a.point.distance(&point) <= DUPLICATE_EPSILON)
        {
            return Err(SpaceError::DuplicateAnchorReading);
        }
        let (embedding, prompt) = match &spec.embedding {
            Some(e) => (e.clone(), None),
            None => {
                let prompt = self.schema.render_prompt(&spec.reading)?;
                let mut out = provider.embed(std::slice::from_ref(&prompt))?;
                if out.len() != 1 {
                    return Err(ProviderError::CountMismatch {
                        expected: 1,
                        got: out.len(),
                    }
                    .into());
                }
                (out.remove(0), Some(prompt))
            }
        };
        let mut plan: Vec<(AnchorSpec, bool)> = self
            .anchors
            .iter()
            .map(|a| (a.spec.clone(), a.corner))
            .collect();
        let mut embeddings: Vec<(Embedding, Option<String>)> = self
            .anchors
            .iter()
            .map(|a| (a.embedding.clone(), a.prompt.clone()))
            .collect();
        plan.push((spec, false));
        embeddings.push((embedding, prompt));
        SensorSpace::assemble(
            self.schema.clone(),
            plan,
            embeddings,
            self.provider_id.clone(),
        )
    }
}
