use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GenesisError, LatentState};
use crate::geometry::Point;

/// One generated result, keyed by its normalized reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "EntryRecord", try_from = "EntryRecord")]
pub struct CacheEntry {
    pub point: Point,
    pub embedding_digest: u64,
    pub latent: LatentState,
    pub artifact_digest: String,
    /// Logical clock values, see [`LatentCache`].
    pub created_at: u64,
    pub last_hit_at: u64,
    pub hit_count: u64,
}

// On-disk shape: one flat JSON object per line.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRecord {
    point: Vec<f64>,
    embedding_digest: String,
    latent: Vec<f64>,
    #[serde(default)]
    step_count: u64,
    artifact_digest: String,
    created_at: u64,
    last_hit_at: u64,
    hit_count: u64,
}

impl From<CacheEntry> for EntryRecord {
    fn from(e: CacheEntry) -> Self {
        EntryRecord {
            point: e.point.coords().to_vec(),
            embedding_digest: format!("{:016x}", e.embedding_digest),
            latent: e.latent.values,
            step_count: e.latent.step_count,
            artifact_digest: e.artifact_digest,
            created_at: e.created_at,
            last_hit_at: e.last_hit_at,
            hit_count: e.hit_count,
        }
    }
}

impl TryFrom<EntryRecord> for CacheEntry {
    type Error = String;

    fn try_from(r: EntryRecord) -> Result<Self, String> {
        let embedding_digest = u64::from_str_radix(&r.embedding_digest, 16)
            .map_err(|e| format!("embedding_digest: {e}"))?;
        if r.point.is_empty() || r.latent.is_empty() {
            return Err("empty point or latent".into());
        }
        if r.point.iter().chain(&r.latent).any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        Ok(CacheEntry {
            point: Point::new(r.point),
            embedding_digest,
            latent: LatentState {
                values: r.latent,
                step_count: r.step_count,
            },
            artifact_digest: r.artifact_digest,
            created_at: r.created_at,
            last_hit_at: r.last_hit_at,
            hit_count: r.hit_count,
        })
    }
}

/// Outcome of [`LatentCache::load`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadReport {
    pub entries: usize,
    /// Malformed lines that were skipped.
    pub warnings: usize,
}

/// Table of generated latents keyed by normalized reading.
///
/// Timestamps come from a logical clock that ticks on every insertion and
/// hit, which keeps saved caches and replays reproducible. Entries keep
/// insertion order. Single-writer: callers serialize mutations.
#[derive(Debug, Clone, Default)]
pub struct LatentCache {
    entries: Vec<CacheEntry>,
    clock: u64,
    capacity: Option<usize>,
}

/// Caches compare by their entries.
impl PartialEq for LatentCache {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl LatentCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// A cache that evicts down to `capacity` after every insertion.
    pub fn with_capacity(capacity: usize) -> Result<Self, GenesisError> {
        if capacity == 0 {
            return Err(GenesisError::ZeroCapacity);
        }
        Ok(LatentCache {
            capacity: Some(capacity),
            ..Self::default()
        })
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn set_capacity(&mut self, capacity: Option<usize>) -> Result<(), GenesisError> {
        if let Some(c) = capacity {
            self.evict(c)?;
        }
        self.capacity = capacity;
        Ok(())
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn check_dim(&self, point: &Point) -> Result<(), GenesisError> {
        match self.entries.first() {
            Some(e) if e.point.dim() != point.dim() => Err(GenesisError::DimensionMismatch {
                expected: e.point.dim(),
                got: point.dim(),
            }),
            _ => Ok(()),
        }
    }

    /// Index of and distance to the closest entry. Ties go to the most
    /// recently hit entry, then to the earliest inserted.
    pub fn nearest(&self, point: &Point) -> Result<Option<(usize, f64)>, GenesisError> {
        self.check_dim(point)?;
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            let d = e.point.distance(point);
            let better = match best {
                None => true,
                Some((j, bd)) => d < bd || (d == bd && e.last_hit_at > self.entries[j].last_hit_at),
            };
            if better {
                best = Some((i, d));
            }
        }
        Ok(best)
    }

    /// Marks entry `index` as hit.
    pub fn touch(&mut self, index: usize) {
        let now = self.tick();
        let e = &mut self.entries[index];
        e.last_hit_at = now;
        e.hit_count += 1;
    }

    /// Stores a generation result, either over entry `replace` or as a new
    /// entry, then applies the capacity limit.
    pub fn record(
        &mut self,
        replace: Option<usize>,
        point: Point,
        embedding_digest: u64,
        latent: LatentState,
        artifact_digest: String,
    ) -> Result<(), GenesisError> {
        self.check_dim(&point)?;
        match replace {
            Some(i) => {
                let e = &mut self.entries[i];
                e.embedding_digest = embedding_digest;
                e.latent = latent;
                e.artifact_digest = artifact_digest;
            }
            None => {
                let now = self.tick();
                self.entries.push(CacheEntry {
                    point,
                    embedding_digest,
                    latent,
                    artifact_digest,
                    created_at: now,
                    last_hit_at: now,
                    hit_count: 0,
                });
            }
        }
        if let Some(c) = self.capacity {
            self.evict(c)?;
        }
        Ok(())
    }

    /// Drops least recently hit entries until at most `capacity` remain.
    /// Returns how many were removed.
    pub fn evict(&mut self, capacity: usize) -> Result<usize, GenesisError> {
        if capacity == 0 {
            return Err(GenesisError::ZeroCapacity);
        }
        let excess = self.entries.len().saturating_sub(capacity);
        if excess == 0 {
            return Ok(0);
        }
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by_key(|&i| (self.entries[i].last_hit_at, i));
        let mut drop = vec![false; self.entries.len()];
        for &i in &order[..excess] {
            drop[i] = true;
        }
        let mut k = 0;
        self.entries.retain(|_| {
            k += 1;
            !drop[k - 1]
        });
        Ok(excess)
    }

    /// Writes one JSON object per line. The file is replaced atomically.
    pub fn save(&self, path: &Path) -> Result<(), GenesisError> {
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            for e in &self.entries {
                serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads a cache written by [`save`](Self::save). Malformed lines are
    /// skipped and counted.
    pub fn load(path: &Path) -> Result<(Self, LoadReport), GenesisError> {
        let reader = BufReader::new(File::open(path)?);
        let mut cache = LatentCache::new();
        let mut warnings = 0;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<CacheEntry>(&line)
                .map_err(|e| e.to_string())
                .and_then(|e| match cache.check_dim(&e.point) {
                    Ok(()) => Ok(e),
                    Err(err) => Err(err.to_string()),
                });
            match parsed {
                Ok(e) => {
                    cache.clock = cache.clock.max(e.created_at).max(e.last_hit_at);
                    cache.entries.push(e);
                }
                Err(msg) => {
                    log::warn!("{}:{}: skipping cache entry: {msg}", path.display(), n + 1);
                    warnings += 1;
                }
            }
        }
        let report = LoadReport {
            entries: cache.len(),
            warnings,
        };
        Ok((cache, report))
    }
}
