//! Prompt embeddings and exhaustive cosine ranking for heuristic donor sampling.
//!
//! Two providers exist. `FileBacked` serves vectors produced elsewhere (for
//! example by a transformer sentence encoder) keyed by instance id.
//! `HashedBow` needs no model: each case-folded token is hashed into one of
//! `dimension` buckets, counts are accumulated and the vector L2-normalized.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::text::{fnv1a64, tokens};

pub const DEFAULT_DIMENSION: usize = 1024;

/// An id together with the text it stands for. File-backed lookups use the
/// id; the hashed provider uses the text.
#[derive(Debug, Clone, Copy)]
pub struct TextRef<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

impl<'a> TextRef<'a> {
    pub fn new(id: &'a str, text: &'a str) -> Self {
        TextRef { id, text }
    }
}

#[derive(Debug, Clone)]
pub enum EmbeddingProvider {
    FileBacked { dimension: usize, vectors: HashMap<String, Vec<f64>> },
    HashedBow { dimension: usize },
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    id: Option<String>,
    vector: Option<Vec<f64>>,
}

fn check_vector(id: &str, v: &[f64], dimension: usize) -> Result<()> {
    if v.len() != dimension {
        return Err(Error::Dimension { expected: dimension, found: v.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Schema { id: id.to_string(), message: "non-finite embedding component".into() });
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::Schema { id: id.to_string(), message: "all-zero embedding".into() });
    }
    Ok(())
}

impl EmbeddingProvider {
    pub fn hashed_bow(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be > 0".into()));
        }
        Ok(EmbeddingProvider::HashedBow { dimension })
    }

    pub fn file_backed(vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        let dimension =
            vectors.values().next().map(Vec::len).ok_or_else(|| Error::InvalidArgument("no embeddings".into()))?;
        if dimension == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be > 0".into()));
        }
        for (id, v) in &vectors {
            check_vector(id, v, dimension)?;
        }
        Ok(EmbeddingProvider::FileBacked { dimension, vectors })
    }

    /// Reads `{"id": str, "vector": [float, ...]}` lines. The first record
    /// fixes the dimension. Lines without an `id` (header records) are skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        let mut dimension = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), line: i + 1, message };
            let rec: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            let Some(id) = rec.id else { continue };
            let vector = rec.vector.ok_or_else(|| parse_err("missing `vector`".into()))?;
            let dim = *dimension.get_or_insert(vector.len());
            check_vector(&id, &vector, dim).map_err(|e| parse_err(e.to_string()))?;
            if vectors.insert(id.clone(), vector).is_some() {
                return Err(parse_err(format!("duplicate id `{id}`")));
            }
        }
        if vectors.is_empty() {
            return Err(Error::NoRecords { path: path.to_path_buf() });
        }
        Self::file_backed(vectors)
    }

    pub fn dimension(&self) -> usize {
        match self {
            EmbeddingProvider::FileBacked { dimension, .. } | EmbeddingProvider::HashedBow { dimension } => *dimension,
        }
    }

    pub fn embed(&self, item: TextRef<'_>) -> Result<Vec<f64>> {
        match self {
            EmbeddingProvider::FileBacked { vectors, .. } => {
                vectors.get(item.id).cloned().ok_or_else(|| Error::MissingEmbedding { id: item.id.to_string() })
            }
            EmbeddingProvider::HashedBow { dimension } => {
                let toks = tokens(item.text);
                if toks.is_empty() {
                    return Err(Error::EmptyText);
                }
                let mut v = vec![0.0; *dimension];
                for t in &toks {
                    v[(fnv1a64(t.as_bytes()) % *dimension as u64) as usize] += 1.0;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                Ok(v)
            }
        }
    }

    /// Embeds every item once and returns a file-backed cache of the results.
    pub fn precompute<'a>(&self, items: impl IntoIterator<Item = TextRef<'a>>) -> Result<Self> {
        let mut vectors = HashMap::new();
        for item in items {
            let v = self.embed(item).map_err(|e| match e {
                Error::EmptyText => Error::MissingEmbedding { id: item.id.to_string() },
                e => e,
            })?;
            vectors.insert(item.id.to_string(), v);
        }
        if vectors.is_empty() {
            return Ok(self.clone());
        }
        Ok(EmbeddingProvider::FileBacked { dimension: self.dimension(), vectors })
    }

    /// The `k` candidates most similar to `query`, by descending cosine with
    /// ties broken by ascending id.
    pub fn rank_by_similarity(&self, query: TextRef<'_>, candidates: &[TextRef<'_>], k: usize) -> Result<Vec<String>> {
        if k > candidates.len() {
            return Err(Error::InvalidArgument(format!("k = {k} exceeds {} candidates", candidates.len())));
        }
        let q = self.embed(query)?;
        let mut scored =
            candidates.iter().map(|c| Ok((cosine(&q, &self.embed(*c)?)?, c.id))).collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect())
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension { expected: u.len(), found: v.len() });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}
