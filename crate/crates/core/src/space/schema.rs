use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::SpaceError;
use crate::geometry::MAX_DIMENSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub min: f64,
    pub max: f64,
}

impl SensorSpec {
    pub fn new(name: &str, unit: &str, min: f64, max: f64) -> Self {
        SensorSpec {
            name: name.to_string(),
            unit: unit.to_string(),
            min,
            max,
        }
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Free-text description of where and why the sensors are deployed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

/// Declares the sensors of one visualization space and how readings are
/// phrased as prompts. Placeholders in `prompt_template` are `{sensor_name}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSchema {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_id: Option<String>,
    pub sensors: Vec<SensorSpec>,
    #[serde(default)]
    pub context: SchemaContext,
    /// Object or symbol chosen to depict the data, e.g. "A Calm Room".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifestation: Option<String>,
    pub prompt_template: String,
}

impl SensorSchema {
    pub fn new(sensors: Vec<SensorSpec>, prompt_template: &str) -> Self {
        SensorSchema {
            schema_id: None,
            sensors,
            context: SchemaContext::default(),
            manifestation: None,
            prompt_template: prompt_template.to_string(),
        }
    }

    pub fn dim(&self) -> usize {
        self.sensors.len()
    }

    pub fn sensor(&self, name: &str) -> Option<(usize, &SensorSpec)> {
        self.sensors
            .iter()
            .enumerate()
            .find(|(_, s)| s.name == name)
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        if self.sensors.is_empty() {
            return Err(SpaceError::InvalidSchema("no sensors declared".into()));
        }
        if self.sensors.len() > MAX_DIMENSION {
            return Err(SpaceError::TooManySensors(self.sensors.len()));
        }
        let mut seen = HashSet::new();
        for s in &self.sensors {
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(SpaceError::InvalidSchema(format!(
                    "sensor name {:?} must be non-empty and alphanumeric",
                    s.name
                )));
            }
            if !seen.insert(s.name.as_str()) {
                return Err(SpaceError::InvalidSchema(format!(
                    "sensor {:?} declared twice",
                    s.name
                )));
            }
            if !(s.min.is_finite() && s.max.is_finite() && s.min < s.max) {
                return Err(SpaceError::InvalidSchema(format!(
                    "sensor {:?}: min {} must be below max {}",
                    s.name, s.min, s.max
                )));
            }
        }
        let placeholders = placeholders(&self.prompt_template)?;
        for s in &self.sensors {
            let uses = placeholders.iter().filter(|p| **p == s.name).count();
            if uses != 1 {
                return Err(SpaceError::InvalidSchema(format!(
                    "prompt template must reference {{{}}} exactly once, found {uses}",
                    s.name
                )));
            }
        }
        if let Some(p) = placeholders.iter().find(|p| self.sensor(p).is_none()) {
            return Err(SpaceError::InvalidSchema(format!(
                "prompt template references undeclared sensor {{{p}}}"
            )));
        }
        Ok(())
    }

    /// Substitutes every placeholder with its value at one decimal place.
    pub fn render_prompt(&self, values: &BTreeMap<String, f64>) -> Result<String, SpaceError> {
        let mut out = String::with_capacity(self.prompt_template.len() + 16);
        let mut rest = self.prompt_template.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| SpaceError::InvalidSchema("unclosed '{' in template".into()))?;
            let name = &rest[open + 1..open + close];
            let v = values
                .get(name)
                .ok_or_else(|| SpaceError::MissingSensor(name.to_string()))?;
            out.push_str(&format!("{v:.1}"));
            rest = &rest[open + close + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn placeholders(template: &str) -> Result<Vec<&str>, SpaceError> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| SpaceError::InvalidSchema("unclosed '{' in template".into()))?;
        out.push(&rest[open + 1..open + close]);
        rest = &rest[open + close + 1..];
    }
    Ok(out)
}
