//! Rank correlation, similarity traces, encoder bias scans and survey
//! scoring.

pub mod report;
mod survey;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::embedding::{
    cosine_similarity, Embedding, EmbeddingError, EmbeddingProvider, ProviderError,
};
use crate::space::{Reading, SensorSchema, SensorSpace, SpaceError};

pub use survey::{
    factor_weights, improvement_row, model_metrics, normalize_survey, overall_score,
    reference_metrics, Factor, FactorWeights, Improvement, ImprovementRow, KeyWeights,
    ModelMetrics, Priority, SurveyDataset, SurveyResponse,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid survey data: {0}")]
    InvalidSurvey(String),
    #[error("participant {0:?} selected no factors")]
    EmptySelection(String),
    #[error("no participant selected Accuracy or Coherence")]
    NoWeight,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Kendall's tau-a of `seq` against its index order: `2(P - Q) / (n(n-1))`,
/// where tied pairs count as neither concordant nor discordant.
///
/// Runs in `O(n log n)` by counting inversions with a merge sort.
pub fn kendalls_tau(seq: &[f64]) -> Result<f64, EvalError> {
    let n = seq.len();
    if n < 2 {
        return Err(EvalError::TooShort(n));
    }
    if seq.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let mut work = seq.to_vec();
    let mut buf = vec![0.0; n];
    let discordant = count_inversions(&mut work, &mut buf);
    // `work` is now sorted; equal runs are the tied pairs
    let mut tied = 0u64;
    let mut run = 1u64;
    for i in 1..n {
        if work[i] == work[i - 1] {
            run += 1;
        } else {
            tied += run * (run - 1) / 2;
            run = 1;
        }
    }
    tied += run * (run - 1) / 2;
    let total = (n as u64) * (n as u64 - 1) / 2;
    let concordant = total - discordant - tied;
    Ok((concordant as f64 - discordant as f64) / total as f64)
}

/// Sorts `v` ascending and returns the number of pairs `i < j` with
/// `v[i] > v[j]`.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = v.split_at_mut(mid);
        count_inversions(l, &mut buf[..mid]) + count_inversions(r, &mut buf[mid..])
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            count += (mid - i) as u64;
            buf[k] = v[j];
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..].copy_from_slice(&v[j..]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// Paired samples with strictly increasing `xs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Trace {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, EvalError> {
        if xs.len() != ys.len() {
            return Err(EvalError::InvalidTrace(format!(
                "{} xs but {} ys",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(EvalError::TooShort(xs.len()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite);
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::InvalidTrace(
                "xs must be strictly increasing".into(),
            ));
        }
        Ok(Trace { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn tau(&self) -> f64 {
        kendalls_tau(&self.ys).expect("trace has at least 2 finite values")
    }
}

/// Which end of the swept axis a trace compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Min,
    Max,
}

/// `steps` evenly spaced values from `min` to `max`, ending exactly on `max`.
pub fn sweep(min: f64, max: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|k| {
            if k + 1 == steps {
                max
            } else {
                min + (max - min) * k as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

/// Readings along `axis` with every other sensor fixed at `others` (sensors
/// missing from `others` sit at the middle of their range).
fn sweep_readings(
    schema: &SensorSchema,
    axis: &str,
    others: &BTreeMap<String, f64>,
    steps: usize,
) -> Result<(Vec<f64>, Vec<Reading>), EvalError> {
    let (_, spec) = schema
        .sensor(axis)
        .ok_or_else(|| SpaceError::UnknownSensor(axis.to_string()))?;
    if steps < 2 {
        return Err(EvalError::TooShort(steps));
    }
    if let Some(k) = others.keys().find(|k| schema.sensor(k).is_none()) {
        return Err(SpaceError::UnknownSensor(k.clone()).into());
    }
    let xs = sweep(spec.min, spec.max, steps);
    let readings = xs
        .iter()
        .map(|&x| {
            Reading::new(schema.sensors.iter().map(|s| {
                let v = if s.name == axis {
                    x
                } else {
                    others
                        .get(&s.name)
                        .copied()
                        .unwrap_or(0.5 * (s.min + s.max))
                };
                (s.name.clone(), v)
            }))
        })
        .collect();
    Ok((xs, readings))
}

fn trace_from(
    xs: Vec<f64>,
    embeddings: &[Embedding],
    reference: Reference,
) -> Result<Trace, EvalError> {
    let r = match reference {
        Reference::Min => &embeddings[0],
        Reference::Max => &embeddings[embeddings.len() - 1],
    };
    let ys = embeddings
        .iter()
        .map(|e| cosine_similarity(e, r))
        .collect::<Result<Vec<_>, _>>()?;
    Trace::new(xs, ys)
}

/// Sweeps `axis` over its range and records the cosine similarity of each
/// interpolated embedding to the one at the chosen end of the sweep.
pub fn similarity_trace(
    space: &SensorSpace,
    axis: &str,
    others: &BTreeMap<String, f64>,
    steps: usize,
    reference: Reference,
) -> Result<Trace, EvalError> {
    let (xs, readings) = sweep_readings(space.schema(), axis, others, steps)?;
    let embeddings = readings
        .iter()
        .map(|r| space.interpolate(r).map(|i| i.embedding))
        .collect::<Result<Vec<_>, _>>()?;
    trace_from(xs, &embeddings, reference)
}

/// Like [`similarity_trace`], but every point is embedded directly from its
/// rendered prompt instead of being interpolated.
pub fn direct_trace(
    provider: &dyn EmbeddingProvider,
    schema: &SensorSchema,
    axis: &str,
    others: &BTreeMap<String, f64>,
    steps: usize,
    reference: Reference,
) -> Result<Trace, EvalError> {
    let (xs, readings) = sweep_readings(schema, axis, others, steps)?;
    let prompts = readings
        .iter()
        .map(|r| schema.render_prompt(&r.values))
        .collect::<Result<Vec<_>, _>>()?;
    let embeddings = provider.embed(&prompts)?;
    if embeddings.len() != prompts.len() {
        return Err(ProviderError::CountMismatch {
            expected: prompts.len(),
            got: embeddings.len(),
        }
        .into());
    }
    trace_from(xs, &embeddings, reference)
}

/// Similarity spread below which a trace counts as having no trend.
pub const FLAT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisMonotonicity {
    pub axis: String,
    pub tau_toward_min: f64,
    pub tau_toward_max: f64,
    /// Either tau is short of perfect.
    pub flagged: bool,
    /// The trace has no trend at all (every similarity equal within
    /// [`FLAT_TOLERANCE`]).
    pub degenerate: bool,
}

/// Runs both traces for every axis, other sensors at mid-range.
pub fn monotonicity_report(
    space: &SensorSpace,
    steps: usize,
) -> Result<Vec<AxisMonotonicity>, EvalError> {
    monotonicity_report_at(space, steps, &BTreeMap::new())
}

/// [`monotonicity_report`] with the fixed sensors at `others`.
pub fn monotonicity_report_at(
    space: &SensorSpace,
    steps: usize,
    others: &BTreeMap<String, f64>,
) -> Result<Vec<AxisMonotonicity>, EvalError> {
    space
        .schema()
        .sensors
        .iter()
        .map(|s| {
            let to_min = similarity_trace(space, &s.name, others, steps, Reference::Min)?;
            let to_max = similarity_trace(space, &s.name, others, steps, Reference::Max)?;
            let flat = |t: &Trace| {
                t.ys()
                    .iter()
                    .all(|&y| (y - t.ys()[0]).abs() <= FLAT_TOLERANCE)
            };
            // Toward the min end similarity should fall, toward max it should rise.
            let (tmin, tmax) = (to_min.tau(), to_max.tau());
            Ok(AxisMonotonicity {
                axis: s.name.clone(),
                tau_toward_min: tmin,
                tau_toward_max: tmax,
                flagged: tmin != -1.0 || tmax != 1.0,
                degenerate: flat(&to_min) || flat(&to_max),
            })
        })
        .collect()
}

/// Mean similarity per equal-width bin of value difference. Empty bins are
/// omitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedMean {
    pub centers: Vec<f64>,
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
    pub bin_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasScan {
    /// `(|v_i - v_j|, cosine similarity)` for every `i < j`.
    pub pairs: Vec<(f64, f64)>,
    pub binned_mean: BinnedMean,
}

pub const DEFAULT_BIAS_BINS: usize = 20;

/// Placeholder substituted by [`encoder_bias_scan`].
pub const BIAS_PLACEHOLDER: &str = "{x}";

/// Embeds `template` with each value substituted for `{x}` (one decimal) and
/// relates pairwise similarity to the numeric difference.
pub fn encoder_bias_scan(
    provider: &dyn EmbeddingProvider,
    template: &str,
    values: &[f64],
    bins: usize,
) -> Result<BiasScan, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::TooShort(values.len()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    if !template.contains(BIAS_PLACEHOLDER) {
        return Err(EvalError::InvalidTrace(format!(
            "template must contain {BIAS_PLACEHOLDER}"
        )));
    }
    let bins = bins.max(1);
    let texts: Vec<String> = values
        .iter()
        .map(|v| template.replace(BIAS_PLACEHOLDER, &format!("{v:.1}")))
        .collect();
    let embeddings = provider.embed(&texts)?;
    if embeddings.len() != texts.len() {
        return Err(ProviderError::CountMismatch {
            expected: texts.len(),
            got: embeddings.len(),
        }
        .into());
    }
    let mut pairs = Vec::with_capacity(values.len() * (values.len() - 1) / 2);
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let sim = cosine_similarity(&embeddings[i], &embeddings[j])?;
            pairs.push(((values[i] - values[j]).abs(), sim));
        }
    }
    let max_diff = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let width = if max_diff > 0.0 {
        max_diff / bins as f64
    } else {
        1.0
    };
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for &(d, s) in &pairs {
        let b = ((d / width) as usize).min(bins - 1);
        sums[b] += s;
        counts[b] += 1;
    }
    let mut binned = BinnedMean {
        centers: Vec::new(),
        means: Vec::new(),
        counts: Vec::new(),
        bin_width: width,
    };
    for b in 0..bins {
        if counts[b] > 0 {
            binned.centers.push((b as f64 + 0.5) * width);
            binned.means.push(sums[b] / counts[b] as f64);
            binned.counts.push(counts[b]);
        }
    }
    Ok(BiasScan {
        pairs,
        binned_mean: binned,
    })
}
