//! Goal-similarity retrieval for with-reference planning: embed goals,
//! rank the corpus by cosine similarity, and assemble reference blocks from
//! the most similar episodes' action histories.
//!
//! The default embedding is hashed character trigrams (512 dims,
//! L2-normalized), so the harness runs fully offline; any other encoder can
//! drop in through [`EmbeddingBackend`].

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dataset, Episode};
use crate::parser::describe_action;
use crate::prompt::{ReferenceBlock, ReferenceEntry};

/// A goal embedding with its Euclidean norm cached.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalVector {
    dims: Vec<f64>,
    norm: f64,
}

impl GoalVector {
    pub fn from_dims(dims: Vec<f64>) -> Self {
        let norm = dims.iter().map(|d| d * d).sum::<f64>().sqrt();
        Self { dims, norm }
    }

    pub fn dims(&self) -> &[f64] {
        &self.dims
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Cosine similarity; zero vectors have similarity 0 with everything.
    pub fn cosine(&self, other: &GoalVector) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        let dot: f64 = self.dims.iter().zip(&other.dims).map(|(a, b)| a * b).sum();
        dot / (self.norm * other.norm)
    }
}

pub trait EmbeddingBackend: Send + Sync {
    fn id(&self) -> &str;
    fn embed(&self, text: &str) -> GoalVector;
}

/// Deterministic 64-bit FNV-1a, used for trigram bucketing and cache keys.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Hashed character-trigram counts over lowercased text, L2-normalized.
/// Texts shorter than three characters contribute the whole text as one
/// gram, so only the empty goal embeds to the zero vector.
#[derive(Clone, Debug)]
pub struct TrigramEmbedder {
    pub dims: usize,
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self { dims: 512 }
    }
}

impl EmbeddingBackend for TrigramEmbedder {
    fn id(&self) -> &str {
        "trigram-512"
    }

    fn embed(&self, text: &str) -> GoalVector {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let mut counts = vec![0.0f64; self.dims];
        let mut add = |gram: &[char]| {
            let s: String = gram.iter().collect();
            let bucket = (fnv1a_64(s.as_bytes()) % self.dims as u64) as usize;
            counts[bucket] += 1.0;
        };
        if chars.len() >= 3 {
            for w in chars.windows(3) {
                add(w);
            }
        } else if !chars.is_empty() {
            add(&chars);
        }
        GoalVector::from_dims(counts)
    }
}

/// Embed with the default offline backend.
pub fn embed_goal(text: &str) -> GoalVector {
    TrigramEmbedder::default().embed(text)
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("corpus has {available} candidate episodes, need {needed}")]
    CorpusTooSmall { available: usize, needed: usize },
    #[error("no stored action descriptions for reference episode `{id}`")]
    MissingTrace { id: String },
    #[error("cannot read embedding cache {path}: {message}")]
    Cache { path: String, message: String },
}

/// Rank `corpus` by goal similarity to `query`, excluding the query itself,
/// descending cosine with episode-id tiebreak. Returns the top `k`.
pub fn top_k_similar<'a>(
    query: &Episode,
    corpus: &'a [Episode],
    k: usize,
    backend: &dyn EmbeddingBackend,
) -> Result<Vec<&'a Episode>, RetrievalError> {
    let query_vec = backend.embed(&query.goal);
    let mut scored: Vec<(f64, &Episode)> = corpus
        .iter()
        .filter(|e| e.id != query.id)
        .map(|e| (query_vec.cosine(&backend.embed(&e.goal)), e))
        .collect();
    if scored.len() < k {
        return Err(RetrievalError::CorpusTooSmall { available: scored.len(), needed: k });
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.id.cmp(&b.1.id))
    });
    Ok(scored.into_iter().take(k).map(|(_, e)| e).collect())
}

/// Where reference action sequences come from: the corpus gold actions, or
/// a prior run's predictions keyed by episode id.
#[derive(Clone, Debug, Default)]
pub enum ReferenceActionSource {
    #[default]
    Gold,
    Predicted(HashMap<String, Vec<String>>),
}

/// Assemble the prompt-side reference block for already-ranked episodes:
/// goal, initial-screen caption, and the full action-description sequence.
pub fn build_reference_block(
    refs: &[&Episode],
    source: &ReferenceActionSource,
) -> Result<ReferenceBlock, RetrievalError> {
    let mut entries = Vec::with_capacity(refs.len());
    for e in refs {
        let action_descriptions = match source {
            ReferenceActionSource::Gold => e
                .steps
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let desc = describe_action(&s.action, Some(&s.screen));
                    format!("{{\"step_idx\": {i}, \"action_description\": {}}}", serde_json::to_string(&desc).expect("string"))
                })
                .collect(),
            ReferenceActionSource::Predicted(map) => map
                .get(&e.id)
                .cloned()
                .ok_or_else(|| RetrievalError::MissingTrace { id: e.id.clone() })?,
        };
        entries.push(ReferenceEntry {
            goal: e.goal.clone(),
            initial_caption: e
                .steps
                .first()
                .and_then(|s| s.screen.caption.clone())
                .unwrap_or_default(),
            action_descriptions,
        });
    }
    Ok(ReferenceBlock { entries })
}

/// Which episodes are candidate references for a query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReferencePool {
    /// Only episodes sharing the query's subset tag.
    #[default]
    SameSubset,
    All,
}

/// A prepared retriever: corpus vectors are computed once and shared
/// read-only across episode runs.
pub struct ReferenceRetriever {
    episodes: Vec<Episode>,
    vectors: Vec<GoalVector>,
    backend: Arc<dyn EmbeddingBackend>,
    pub k: usize,
    pub pool: ReferencePool,
    pub source: ReferenceActionSource,
}

impl ReferenceRetriever {
    pub fn new(
        corpus: &Dataset,
        k: usize,
        pool: ReferencePool,
        source: ReferenceActionSource,
        backend: Arc<dyn EmbeddingBackend>,
    ) -> Self {
        let vectors = corpus.episodes.iter().map(|e| backend.embed(&e.goal)).collect();
        Self {
            episodes: corpus.episodes.clone(),
            vectors,
            backend,
            k,
            pool,
            source,
        }
    }

    /// Rank and assemble references for one query episode.
    pub fn references_for(&self, query: &Episode) -> Result<ReferenceBlock, RetrievalError> {
        let query_vec = self.backend.embed(&query.goal);
        let mut scored: Vec<(f64, &Episode)> = self
            .episodes
            .iter()
            .zip(&self.vectors)
            .filter(|(e, _)| e.id != query.id)
            .filter(|(e, _)| match self.pool {
                ReferencePool::SameSubset => e.subset == query.subset,
                ReferencePool::All => true,
            })
            .map(|(e, v)| (query_vec.cosine(v), e))
            .collect();
        if scored.len() < self.k {
            return Err(RetrievalError::CorpusTooSmall { available: scored.len(), needed: self.k });
        }
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.1.id.cmp(&b.1.id))
        });
        let refs: Vec<&Episode> = scored.into_iter().take(self.k).map(|(_, e)| e).collect();
        build_reference_block(&refs, &self.source)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    backend_id: String,
    goal_hash: u64,
    dims: Vec<f64>,
}

/// Optional precomputed-embedding cache, keyed by `(backend id, goal hash)`.
#[derive(Default)]
pub struct EmbeddingCache {
    entries: HashMap<(String, u64), Vec<f64>>,
}

impl EmbeddingCache {
    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let content = fs::read_to_string(path).map_err(|e| RetrievalError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut entries = HashMap::new();
        for line in content.lines().filter(|l| !l.trim().is_empty()) {
            let parsed: CacheLine = serde_json::from_str(line).map_err(|e| RetrievalError::Cache {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            entries.insert((parsed.backend_id, parsed.goal_hash), parsed.dims);
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let mut keys: Vec<&(String, u64)> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for key in keys {
            let line = CacheLine {
                backend_id: key.0.clone(),
                goal_hash: key.1,
                dims: self.entries[key].clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("cache line serializes"));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| RetrievalError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn get(&self, backend: &dyn EmbeddingBackend, goal: &str) -> Option<GoalVector> {
        self.entries
            .get(&(backend.id().to_string(), fnv1a_64(goal.as_bytes())))
            .map(|dims| GoalVector::from_dims(dims.clone()))
    }

    pub fn put(&mut self, backend: &dyn EmbeddingBackend, goal: &str, vector: &GoalVector) {
        self.entries.insert(
            (backend.id().to_string(), fnv1a_64(goal.as_bytes())),
            vector.dims().to_vec(),
        );
    }
}
