use std::path::{Path, PathBuf};
use std::sync::Arc;

use sensorspace_core::embedding::{EmbeddingProvider, RemoteProvider, SyntheticProvider};
use sensorspace_core::genesis::{
    IterationPolicy, IterativeGenerator, MockGenerator, RemoteGenerator,
};
use serde::{Deserialize, Serialize};

pub const ENV_LISTEN: &str = "SENSORSPACE_LISTEN";
pub const ENV_PROVIDER_ENDPOINT: &str = "SENSORSPACE_PROVIDER_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProviderConfig {
    Synthetic {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_synthetic_dim")]
        dim: usize,
    },
    Remote {
        endpoint: String,
        #[serde(default = "default_remote_dim")]
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorConfig {
    Mock {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_latent_dim")]
        latent_dim: usize,
    },
    Remote {
        endpoint: String,
        latent_dim: usize,
    },
}

fn default_synthetic_dim() -> usize {
    SyntheticProvider::DEFAULT_DIM
}

fn default_remote_dim() -> usize {
    RemoteProvider::DEFAULT_DIM
}

fn default_latent_dim() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    /// Entries kept per schema; least recently hit entries go first.
    #[serde(default = "default_capacity")]
    pub capacity: usize,
}

fn default_capacity() -> usize {
    10_000
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            capacity: default_capacity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    pub provider: ProviderConfig,
    pub generator: GeneratorConfig,
    pub policy: IterationPolicy,
    pub cache: CacheConfig,
    /// Schemas, anchor embeddings and caches live under `data_dir/schemas`.
    pub data_dir: PathBuf,
    /// Mixed with each schema id to give that schema its generation seed.
    pub generation_seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen: "127.0.0.1:8080".into(),
            provider: ProviderConfig::Synthetic {
                seed: 0,
                dim: default_synthetic_dim(),
            },
            generator: GeneratorConfig::Mock {
                seed: 0,
                latent_dim: default_latent_dim(),
            },
            policy: IterationPolicy::default(),
            cache: CacheConfig::default(),
            data_dir: PathBuf::from("data"),
            generation_seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl Config {
    /// Reads a JSON config and applies environment overrides.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: Config =
            serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        // relative data directories are relative to the config file
        if config.data_dir.is_relative() {
            if let Some(parent) = path.parent() {
                config.data_dir = parent.join(&config.data_dir);
            }
        }
        config.apply_env(|k| std::env::var(k).ok());
        config.validate()?;
        Ok(config)
    }

    /// `SENSORSPACE_LISTEN` replaces the listen address;
    /// `SENSORSPACE_PROVIDER_ENDPOINT` switches to the remote provider at
    /// that endpoint.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(listen) = var(ENV_LISTEN) {
            self.listen = listen;
        }
        if let Some(endpoint) = var(ENV_PROVIDER_ENDPOINT) {
            let dim = match self.provider {
                ProviderConfig::Remote { dim, .. } => dim,
                ProviderConfig::Synthetic { .. } => default_remote_dim(),
            };
            self.provider = ProviderConfig::Remote { endpoint, dim };
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.policy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.cache.capacity == 0 {
            return Err(ConfigError::Invalid(
                "cache capacity must be at least 1".into(),
            ));
        }
        let (ProviderConfig::Synthetic { dim, .. } | ProviderConfig::Remote { dim, .. }) =
            self.provider;
        if dim < 2 {
            return Err(ConfigError::Invalid(
                "embedding dimension must be at least 2".into(),
            ));
        }
        let (GeneratorConfig::Mock { latent_dim, .. } | GeneratorConfig::Remote { latent_dim, .. }) =
            self.generator;
        if latent_dim == 0 {
            return Err(ConfigError::Invalid(
                "latent dimension must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn build_provider(&self) -> Arc<dyn EmbeddingProvider> {
        match &self.provider {
            ProviderConfig::Synthetic { seed, dim } => {
                Arc::new(SyntheticProvider::new(*seed, *dim))
            }
            ProviderConfig::Remote { endpoint, dim } => {
                Arc::new(RemoteProvider::new(endpoint, *dim))
            }
        }
    }

    pub fn build_generator(&self, embedding_dim: usize) -> Arc<dyn IterativeGenerator> {
        match &self.generator {
            GeneratorConfig::Mock { seed, latent_dim } => {
                Arc::new(MockGenerator::new(*seed, embedding_dim, *latent_dim))
            }
            GeneratorConfig::Remote {
                endpoint,
                latent_dim,
            } => Arc::new(RemoteGenerator::new(endpoint, *latent_dim)),
        }
    }
}
