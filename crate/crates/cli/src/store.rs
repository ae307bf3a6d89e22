//! On-disk layout of a registered schema:
//!
//! ```text
//! <data_dir>/schemas/<id>/schema.json   registration payload, user anchors, provider id
//! <data_dir>/schemas/<id>/anchors.bin   anchor embeddings, f32 little-endian
//! <data_dir>/schemas/<id>/cache.jsonl   latent cache
//! ```

use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use sensorspace_core::embedding::{read_embeddings, write_embeddings};
use sensorspace_core::space::{anchor_plan, AnchorSpec, SensorSchema, SensorSpace, SpaceError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Body of `POST /schemas` and of schema files given to the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaPayload {
    #[serde(flatten)]
    pub schema: SensorSchema,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<AnchorSpec>,
}

impl SchemaPayload {
    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_json(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// The declared id, or one derived from the payload content.
    pub fn id(&self) -> String {
        match &self.schema.schema_id {
            Some(id) => id.clone(),
            None => {
                let bytes = serde_json::to_vec(self).expect("payload serializes");
                let digest = hex::encode(Sha256::digest(&bytes));
                format!("s{}", &digest[..16])
            }
        }
    }
}

/// Ids become directory names, so they are restricted.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredSchema {
    registration: SchemaPayload,
    anchors: Vec<AnchorSpec>,
    provider_id: String,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

pub fn schemas_dir(data_dir: &Path) -> PathBuf {
    data_dir.join("schemas")
}

pub fn cache_path(schema_dir: &Path) -> PathBuf {
    schema_dir.join("cache.jsonl")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

/// Persists a space together with the payload it was registered from.
pub fn save_space(dir: &Path, registration: &SchemaPayload, space: &SensorSpace) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut bin = Vec::new();
    let embeddings: Vec<_> = space
        .anchors()
        .iter()
        .map(|a| a.embedding.clone())
        .collect();
    write_embeddings(&mut bin, &embeddings)?;
    write_atomic(&dir.join("anchors.bin"), &bin)?;
    let stored = StoredSchema {
        registration: registration.clone(),
        anchors: space.user_anchors(),
        provider_id: space.provider_id().to_string(),
    };
    let json = serde_json::to_vec_pretty(&stored).map_err(io::Error::from)?;
    write_atomic(&dir.join("schema.json"), &json)
}

/// Rebuilds a saved space from its stored embeddings, without a provider.
pub fn load_space(dir: &Path) -> Result<(SchemaPayload, SensorSpace), StoreError> {
    let schema_path = dir.join("schema.json");
    let corrupt = |path: &Path, message: String| StoreError::Corrupt {
        path: path.to_path_buf(),
        message,
    };
    let stored: StoredSchema = serde_json::from_slice(&fs::read(&schema_path)?)
        .map_err(|e| corrupt(&schema_path, e.to_string()))?;
    let bin_path = dir.join("anchors.bin");
    let embeddings = read_embeddings(BufReader::new(fs::File::open(&bin_path)?))
        .map_err(|e| corrupt(&bin_path, e.to_string()))?;
    let schema = stored.registration.schema.clone();
    let plan = anchor_plan(&schema, &stored.anchors)?;
    if plan.len() != embeddings.len() {
        return Err(corrupt(
            &bin_path,
            format!("{} embeddings for {} anchors", embeddings.len(), plan.len()),
        ));
    }
    let resolved = plan
        .iter()
        .zip(embeddings)
        .map(|((spec, _), e)| {
            let prompt = match spec.embedding {
                Some(_) => None,
                None => Some(schema.render_prompt(&spec.reading)?),
            };
            Ok((e, prompt))
        })
        .collect::<Result<Vec<_>, SpaceError>>()?;
    let space = SensorSpace::assemble(schema, plan, resolved, stored.provider_id)?;
    Ok((stored.registration, space))
}
