//! HTTP/JSON service.
//!
//! Each registered schema holds an immutable [`SensorSpace`] snapshot behind
//! a lock that is only taken to clone or swap the `Arc`, so readers never see
//! a half-built tessellation. Anchor updates and generations are serialized
//! per schema. Engine work runs on the blocking thread pool.

use std::collections::BTreeMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::Router;
use sensorspace_core::embedding::EmbeddingProvider;
use sensorspace_core::genesis::{generate, IterativeGenerator, LatentCache};
use sensorspace_core::hash::{fnv1a64, splitmix64};
use sensorspace_core::space::{build_space, AnchorSpec, Reading, SensorSpace};
use serde::{de::DeserializeOwned, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use crate::api::{ApiError, ApiOk, ErrorCode};
use crate::config::Config;
use crate::store::{self, SchemaPayload};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub generations: u64,
    pub hits: u64,
    pub iterations: u64,
}

pub struct SchemaState {
    id: String,
    dir: PathBuf,
    registration: SchemaPayload,
    space: RwLock<Arc<SensorSpace>>,
    anchor_writer: Mutex<()>,
    cache: Mutex<LatentCache>,
    counters: Mutex<Counters>,
    seed: u64,
}

impl SchemaState {
    pub fn snapshot(&self) -> Arc<SensorSpace> {
        self.space.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

pub struct AppState {
    config: Config,
    provider: Arc<dyn EmbeddingProvider>,
    generator: Arc<dyn IterativeGenerator>,
    schemas: RwLock<BTreeMap<String, Arc<SchemaState>>>,
    registration: Mutex<()>,
}

fn parse<T: DeserializeOwned>(body: &[u8], code: ErrorCode) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(code, format!("malformed body: {e}")))
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn summary(id: &str, space: &SensorSpace) -> serde_json::Value {
    json!({
        "schema_id": id,
        "dim": space.dim(),
        "anchors": space.anchors().len(),
        "simplices": space.cell_count(),
        "embedding_dim": space.embedding_dim(),
        "provider_id": space.provider_id(),
    })
}

impl AppState {
    /// Creates the state and loads every schema persisted under the data
    /// directory. Unreadable schemas are skipped with a warning.
    pub fn open(config: Config) -> std::io::Result<Self> {
        let provider = config.build_provider();
        let generator = config.build_generator(provider.dim());
        let state = AppState {
            config,
            provider,
            generator,
            schemas: RwLock::new(BTreeMap::new()),
            registration: Mutex::new(()),
        };
        let root = store::schemas_dir(&state.config.data_dir);
        std::fs::create_dir_all(&root)?;
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(&root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        for dir in dirs {
            let id = dir
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .to_string();
            match store::load_space(&dir) {
                Ok((registration, space)) => {
                    let cache = state.load_cache(&dir);
                    state.insert(id, dir, registration, space, cache);
                }
                Err(e) => log::warn!("skipping schema {id}: {e}"),
            }
        }
        Ok(state)
    }

    fn load_cache(&self, dir: &std::path::Path) -> LatentCache {
        let path = store::cache_path(dir);
        let mut cache = if path.exists() {
            match LatentCache::load(&path) {
                Ok((cache, report)) => {
                    if report.warnings > 0 {
                        log::warn!(
                            "{}: skipped {} malformed entries",
                            path.display(),
                            report.warnings
                        );
                    }
                    cache
                }
                Err(e) => {
                    log::warn!("{}: {e}; starting with an empty cache", path.display());
                    LatentCache::new()
                }
            }
        } else {
            LatentCache::new()
        };
        // capacity is validated to be non-zero
        let _ = cache.set_capacity(Some(self.config.cache.capacity));
        cache
    }

    fn insert(
        &self,
        id: String,
        dir: PathBuf,
        registration: SchemaPayload,
        space: SensorSpace,
        cache: LatentCache,
    ) -> Arc<SchemaState> {
        let seed = splitmix64(self.config.generation_seed ^ fnv1a64(id.as_bytes()));
        let entry = Arc::new(SchemaState {
            id: id.clone(),
            dir,
            registration,
            space: RwLock::new(Arc::new(space)),
            anchor_writer: Mutex::new(()),
            cache: Mutex::new(cache),
            counters: Mutex::new(Counters::default()),
            seed,
        });
        self.schemas
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, entry.clone());
        entry
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn schema(&self, id: &str) -> Result<Arc<SchemaState>, ApiError> {
        self.schemas
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_schema(id))
    }

    pub fn schema_ids(&self) -> Vec<String> {
        self.schemas
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    pub fn register(&self, body: &[u8]) -> Result<ApiOk, ApiError> {
        let payload: SchemaPayload = parse(body, ErrorCode::BadSchema)?;
        let id = payload.id();
        if !store::valid_id(&id) {
            return Err(ApiError::new(
                ErrorCode::BadSchema,
                "schema_id must be 1-64 characters of [A-Za-z0-9_-]",
            ));
        }
        let _guard = lock(&self.registration);
        if let Ok(existing) = self.schema(&id) {
            if existing.registration != payload {
                return Err(ApiError::new(
                    ErrorCode::BadSchema,
                    format!("schema id {id:?} is already registered with different content"),
                ));
            }
            let mut data = summary(&id, &existing.snapshot());
            data["created"] = json!(false);
            return Ok(ApiOk::new(data));
        }
        let space = build_space(&payload.schema, &payload.anchors, &self.provider)
            .map_err(ApiError::from_registration)?;
        let dir = store::schemas_dir(&self.config.data_dir).join(&id);
        store::save_space(&dir, &payload, &space)
            .map_err(|e| ApiError::internal(format!("persisting schema: {e}")))?;
        let stale = store::cache_path(&dir);
        if stale.exists() {
            std::fs::remove_file(&stale)
                .map_err(|e| ApiError::internal(format!("clearing cache: {e}")))?;
        }
        let mut cache = LatentCache::new();
        let _ = cache.set_capacity(Some(self.config.cache.capacity));
        let mut data = summary(&id, &space);
        data["created"] = json!(true);
        self.insert(id, dir, payload, space, cache);
        Ok(ApiOk::created(data))
    }

    pub fn add_anchor(&self, id: &str, body: &[u8]) -> Result<ApiOk, ApiError> {
        let schema = self.schema(id)?;
        let spec: AnchorSpec = parse(body, ErrorCode::Validation)?;
        let _guard = lock(&schema.anchor_writer);
        let current = schema.snapshot();
        let next = current
            .add_anchor(spec, &self.provider)
            .map_err(ApiError::from_space)?;
        store::save_space(&schema.dir, &schema.registration, &next)
            .map_err(|e| ApiError::internal(format!("persisting schema: {e}")))?;
        let mut data = summary(id, &next);
        data["previous_simplices"] = json!(current.cell_count());
        *schema.space.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        Ok(ApiOk::new(data))
    }

    pub fn interpolate(&self, id: &str, body: &[u8]) -> Result<ApiOk, ApiError> {
        let schema = self.schema(id)?;
        let reading: Reading = parse(body, ErrorCode::Validation)?;
        let result = schema
            .snapshot()
            .interpolate(&reading)
            .map_err(ApiError::from_space)?;
        Ok(ApiOk::new(result))
    }

    pub fn generate(&self, id: &str, body: &[u8]) -> Result<ApiOk, ApiError> {
        let schema = self.schema(id)?;
        let reading: Reading = parse(body, ErrorCode::Validation)?;
        let space = schema.snapshot();
        let mut cache = lock(&schema.cache);
        let result = generate(
            &space,
            &reading,
            &mut cache,
            &self.generator,
            &self.config.policy,
            schema.seed,
        )
        .map_err(ApiError::from_genesis)?;
        cache
            .save(&store::cache_path(&schema.dir))
            .map_err(|e| ApiError::internal(format!("persisting cache: {e}")))?;
        {
            let mut c = lock(&schema.counters);
            c.generations += 1;
            c.hits += u64::from(result.cache_hit);
            c.iterations += u64::from(result.iterations_used);
        }
        Ok(ApiOk::new(json!({
            "artifact_digest": result.artifact_digest,
            "iterations_used": result.iterations_used,
            "cache_hit": result.cache_hit,
            "neighbor_distance": result.neighbor_distance,
        })))
    }

    pub fn cache_stats(&self, id: &str) -> Result<ApiOk, ApiError> {
        let schema = self.schema(id)?;
        let entries = lock(&schema.cache).len();
        let c = *lock(&schema.counters);
        let cold = c.generations * u64::from(self.config.policy.i_full);
        Ok(ApiOk::new(json!({
            "schema_id": schema.id,
            "entries": entries,
            "generations": c.generations,
            "hits": c.hits,
            "hit_rate": if c.generations == 0 { 0.0 } else { c.hits as f64 / c.generations as f64 },
            "iterations_used": c.iterations,
            "iterations_saved": cold - c.iterations,
            "speedup_estimate": if c.iterations == 0 { 1.0 } else { cold as f64 / c.iterations as f64 },
        })))
    }
}

async fn blocking<F>(f: F) -> Result<ApiOk, ApiError>
where
    F: FnOnce() -> Result<ApiOk, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn register(State(st): State<Arc<AppState>>, body: Bytes) -> Result<ApiOk, ApiError> {
    blocking(move || st.register(&body)).await
}

async fn add_anchor(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<ApiOk, ApiError> {
    blocking(move || st.add_anchor(&id, &body)).await
}

async fn interpolate(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<ApiOk, ApiError> {
    blocking(move || st.interpolate(&id, &body)).await
}

async fn generate_handler(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<ApiOk, ApiError> {
    blocking(move || st.generate(&id, &body)).await
}

async fn cache_stats(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<ApiOk, ApiError> {
    st.cache_stats(&id)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/schemas", post(register))
        .route("/schemas/{id}/anchors", post(add_anchor))
        .route("/schemas/{id}/interpolate", post(interpolate))
        .route("/schemas/{id}/generate", post(generate_handler))
        .route("/schemas/{id}/cache/stats", get(cache_stats))
        .with_state(state)
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `config.listen` and serves until Ctrl-C.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let listen = config.listen.clone();
    let state = tokio::task::spawn_blocking(move || AppState::open(config))
        .await
        .map_err(std::io::Error::other)??;
    let listener = TcpListener::bind(&listen).await?;
    let addr: SocketAddr = listener.local_addr()?;
    log::info!(
        "listening on {addr} with {} schema(s) loaded",
        state.schema_ids().len()
    );
    serve_on(listener, Arc::new(state), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
