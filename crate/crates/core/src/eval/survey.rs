use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::Serialize;

use super::EvalError;

/// Rated quality factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Factor {
    Coherence,
    Faithfulness,
    Sensitivity,
}

/// Priority a participant may select; Accuracy covers Faithfulness and
/// Sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Priority {
    Accuracy,
    Coherence,
    Aesthetics,
}

impl FromStr for Factor {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coherence" => Ok(Factor::Coherence),
            "faithfulness" => Ok(Factor::Faithfulness),
            "sensitivity" => Ok(Factor::Sensitivity),
            _ => Err(EvalError::InvalidSurvey(format!("unknown factor {s:?}"))),
        }
    }
}

impl FromStr for Priority {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accuracy" => Ok(Priority::Accuracy),
            "coherence" => Ok(Priority::Coherence),
            "aesthetics" => Ok(Priority::Aesthetics),
            _ => Err(EvalError::InvalidSurvey(format!("unknown priority {s:?}"))),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurveyResponse {
    pub participant_id: String,
    pub question_id: String,
    pub factor: Factor,
    pub model_id: String,
    pub score: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SurveyDataset {
    pub responses: Vec<SurveyResponse>,
    /// Priorities chosen by each participant.
    pub selections: BTreeMap<String, BTreeSet<Priority>>,
}

impl SurveyDataset {
    /// Reads `participant_id,question_id,factor,model_id,score` rows (with a
    /// header). Scores must be integers from 1 to 5.
    pub fn read_responses<R: Read>(r: R) -> Result<Vec<SurveyResponse>, EvalError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut out = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(EvalError::InvalidSurvey(format!(
                    "response row {}: expected 5 fields, got {}",
                    line + 1,
                    rec.len()
                )));
            }
            let score: u8 = rec[4].parse().map_err(|_| {
                EvalError::InvalidSurvey(format!(
                    "response row {}: bad score {:?}",
                    line + 1,
                    &rec[4]
                ))
            })?;
            if !(1..=5).contains(&score) {
                return Err(EvalError::InvalidSurvey(format!(
                    "response row {}: score {score} outside 1-5",
                    line + 1
                )));
            }
            if rec[0].is_empty() || rec[1].is_empty() || rec[3].is_empty() {
                return Err(EvalError::InvalidSurvey(format!(
                    "response row {}: empty id",
                    line + 1
                )));
            }
            out.push(SurveyResponse {
                participant_id: rec[0].to_string(),
                question_id: rec[1].to_string(),
                factor: rec[2].parse()?,
                model_id: rec[3].to_string(),
                score,
            });
        }
        Ok(out)
    }

    /// Reads `participant_id,factors` rows with factors joined by `;`.
    pub fn read_selections<R: Read>(
        r: R,
    ) -> Result<BTreeMap<String, BTreeSet<Priority>>, EvalError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut out = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let set = rec
                .get(1)
                .unwrap_or("")
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(str::parse)
                .collect::<Result<BTreeSet<Priority>, _>>()?;
            out.insert(rec[0].to_string(), set);
        }
        Ok(out)
    }
}

/// Subtracts, per (participant, question, factor) group, the group minimum
/// from every score. Idempotent.
pub fn normalize_survey(data: &SurveyDataset) -> SurveyDataset {
    let mut minima: BTreeMap<(&str, &str, Factor), u8> = BTreeMap::new();
    for r in &data.responses {
        let key = (r.participant_id.as_str(), r.question_id.as_str(), r.factor);
        let m = minima.entry(key).or_insert(r.score);
        *m = (*m).min(r.score);
    }
    let responses = data
        .responses
        .iter()
        .map(|r| {
            let key = (r.participant_id.as_str(), r.question_id.as_str(), r.factor);
            SurveyResponse {
                score: r.score - minima[&key],
                ..r.clone()
            }
        })
        .collect();
    SurveyDataset {
        responses,
        selections: data.selections.clone(),
    }
}

/// Per-model factor scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMetrics {
    pub model_id: String,
    pub coherence: f64,
    pub faithfulness: f64,
    pub sensitivity: f64,
}

impl ModelMetrics {
    pub fn new(model_id: &str, coherence: f64, faithfulness: f64, sensitivity: f64) -> Self {
        ModelMetrics {
            model_id: model_id.to_string(),
            coherence,
            faithfulness,
            sensitivity,
        }
    }

    pub fn get(&self, f: Factor) -> f64 {
        match f {
            Factor::Coherence => self.coherence,
            Factor::Faithfulness => self.faithfulness,
            Factor::Sensitivity => self.sensitivity,
        }
    }
}

/// Per-metric scores of the five compared text-to-visual pipelines, as
/// published.
pub fn reference_metrics() -> Vec<ModelMetrics> {
    vec![
        ModelMetrics::new("ATitan", 0.65, 0.68, 0.64),
        ModelMetrics::new("DallE3", 0.62, 0.70, 0.78),
        ModelMetrics::new("SDE", 0.53, 0.60, 0.60),
        ModelMetrics::new("SDP", 0.59, 0.48, 0.53),
        ModelMetrics::new("Vivar", 0.83, 0.72, 0.83),
    ]
}

/// Aggregates normalized responses: mean score per (model, factor) divided
/// by 4, the widest spread a normalized 1-5 rating can have.
pub fn model_metrics(normalized: &SurveyDataset) -> Result<Vec<ModelMetrics>, EvalError> {
    let mut sums: BTreeMap<&str, [(f64, usize); 3]> = BTreeMap::new();
    for r in &normalized.responses {
        let slot = &mut sums.entry(r.model_id.as_str()).or_default()[r.factor as usize];
        slot.0 += f64::from(r.score);
        slot.1 += 1;
    }
    sums.into_iter()
        .map(|(model, s)| {
            let mean = |i: usize| -> Result<f64, EvalError> {
                if s[i].1 == 0 {
                    return Err(EvalError::InvalidSurvey(format!(
                        "model {model:?} has no ratings for one factor"
                    )));
                }
                Ok(s[i].0 / s[i].1 as f64 / 4.0)
            };
            Ok(ModelMetrics::new(model, mean(0)?, mean(1)?, mean(2)?))
        })
        .collect()
}

/// Weight of a factor by the size of the priority set it was selected in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyWeights {
    pub alone: f64,
    pub with_one: f64,
    pub with_both: f64,
}

impl Default for KeyWeights {
    fn default() -> Self {
        KeyWeights {
            alone: 0.5,
            with_one: 0.3,
            with_both: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorWeights {
    pub coherence: f64,
    pub faithfulness: f64,
    pub sensitivity: f64,
}

impl FactorWeights {
    /// Weights derived from the original survey's selections.
    pub const PUBLISHED: FactorWeights = FactorWeights {
        coherence: 0.344,
        faithfulness: 0.328,
        sensitivity: 0.328,
    };

    pub fn new(coherence: f64, faithfulness: f64, sensitivity: f64) -> Result<Self, EvalError> {
        let w = [coherence, faithfulness, sensitivity];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(EvalError::InvalidSurvey(
                "weights must be non-negative".into(),
            ));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidSurvey(format!(
                "weights sum to {}, expected 1",
                w.iter().sum::<f64>()
            )));
        }
        Ok(FactorWeights {
            coherence,
            faithfulness,
            sensitivity,
        })
    }

    pub fn uniform() -> Self {
        FactorWeights {
            coherence: 1.0 / 3.0,
            faithfulness: 1.0 / 3.0,
            sensitivity: 1.0 / 3.0,
        }
    }
}

/// Factor weights from priority selections.
///
/// Each participant adds the key weight for the size of their selection to
/// every priority they chose. Aesthetics is then dropped, the Accuracy and
/// Coherence totals are normalized to sum to 1, and Accuracy is split evenly
/// between Faithfulness and Sensitivity.
pub fn factor_weights(
    selections: &BTreeMap<String, BTreeSet<Priority>>,
    key: &KeyWeights,
) -> Result<FactorWeights, EvalError> {
    let (mut accuracy, mut coherence) = (0.0, 0.0);
    for (participant, set) in selections {
        let w = match set.len() {
            0 => return Err(EvalError::EmptySelection(participant.clone())),
            1 => key.alone,
            2 => key.with_one,
            _ => key.with_both,
        };
        if set.contains(&Priority::Accuracy) {
            accuracy += w;
        }
        if set.contains(&Priority::Coherence) {
            coherence += w;
        }
    }
    let total = accuracy + coherence;
    if total <= 0.0 {
        return Err(EvalError::NoWeight);
    }
    let half = accuracy / total / 2.0;
    Ok(FactorWeights {
        coherence: coherence / total,
        faithfulness: half,
        sensitivity: half,
    })
}

/// Weighted sum of the three factor scores for each model.
pub fn overall_score(metrics: &[ModelMetrics], w: &FactorWeights) -> Vec<(String, f64)> {
    metrics
        .iter()
        .map(|m| {
            (
                m.model_id.clone(),
                w.faithfulness * m.faithfulness
                    + w.sensitivity * m.sensitivity
                    + w.coherence * m.coherence,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Improvement {
    pub leader: String,
    pub runner_up: String,
    pub absolute: f64,
    /// `absolute / runner_up_score * 100`.
    pub relative_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementRow {
    pub coherence: Improvement,
    pub faithfulness: Improvement,
    pub sensitivity: Improvement,
    pub overall: Improvement,
}

fn round_to(x: f64, decimals: Option<u32>) -> f64 {
    match decimals {
        Some(d) => {
            let s = 10f64.powi(d as i32);
            (x * s).round() / s
        }
        None => x,
    }
}

fn column_improvement(column: &[(String, f64)], decimals: Option<u32>) -> Improvement {
    let mut sorted: Vec<(&str, f64)> = column
        .iter()
        .map(|(m, v)| (m.as_str(), round_to(*v, decimals)))
        .collect();
    // stable: equal scores keep input order
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (leader, best) = sorted[0];
    let (runner_up, second) = sorted[1];
    let absolute = best - second;
    Improvement {
        leader: leader.to_string(),
        runner_up: runner_up.to_string(),
        absolute,
        relative_pct: if second == 0.0 {
            0.0
        } else {
            absolute / second * 100.0
        },
    }
}

/// Lead of the best model over the second best in each column. With
/// `decimals`, scores are first rounded as they would be displayed.
pub fn improvement_row(
    metrics: &[ModelMetrics],
    weights: &FactorWeights,
    decimals: Option<u32>,
) -> Result<ImprovementRow, EvalError> {
    if metrics.len() < 2 {
        return Err(EvalError::TooShort(metrics.len()));
    }
    let column = |f: Factor| -> Vec<(String, f64)> {
        metrics
            .iter()
            .map(|m| (m.model_id.clone(), m.get(f)))
            .collect()
    };
    Ok(ImprovementRow {
        coherence: column_improvement(&column(Factor::Coherence), decimals),
        faithfulness: column_improvement(&column(Factor::Faithfulness), decimals),
        sensitivity: column_improvement(&column(Factor::Sensitivity), decimals),
        overall: column_improvement(&overall_score(metrics, weights), decimals),
    })
}
