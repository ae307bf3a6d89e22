//! Binary embedding tables: `b"EMB1"`, `u32` count, `u32` dim, then
//! `count * dim` little-endian `f32` values.

use std::io::{Read, Write};

use super::{Embedding, EmbeddingError};

const MAGIC: &[u8; 4] = b"EMB1";

pub fn write_embeddings<W: Write>(mut w: W, embeddings: &[Embedding]) -> std::io::Result<()> {
    let dim = embeddings.first().map_or(0, Embedding::dim);
    if embeddings.iter().any(|e| e.dim() != dim) {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "embeddings in one table must share a dimension",
        ));
    }
    w.write_all(MAGIC)?;
    w.write_all(&(embeddings.len() as u32).to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    for e in embeddings {
        for &v in e.values() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn read_embeddings<R: Read>(mut r: R) -> Result<Vec<Embedding>, EmbeddingError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| EmbeddingError::Format(e.to_string()))?;
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(EmbeddingError::Format("missing header".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (count, dim) = (word(4), word(8));
    let body = &bytes[12..];
    if body.len() != count * dim * 4 {
        return Err(EmbeddingError::Format(format!(
            "expected {} payload bytes, found {}",
            count * dim * 4,
            body.len()
        )));
    }
    body.chunks_exact(dim.max(1) * 4)
        .take(count)
        .map(|row| {
            let values = row
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                .collect();
            Embedding::new(values)
        })
        .collect()
}
