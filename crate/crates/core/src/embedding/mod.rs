//! Node embeddings, cosine similarity and top-k selection.

mod hash;
mod io;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{KnowledgeGraph, NodeId, NodeRecord};

pub use hash::hash_embedder;
pub use io::{read_binary, read_text, write_binary, write_text};

/// Default embedding width when none is configured.
pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("vector length {got} does not match dimension {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("zero-norm embedding for node {0}")]
    ZeroNormNode(NodeId),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("missing embedding for node {0}")]
    Missing(NodeId),
    #[error("duplicate embedding for node {0}")]
    Duplicate(NodeId),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("candidate restriction is empty")]
    EmptyRestriction,
    #[error("embedding dimension must be at least {min}, got {got}")]
    BadDim { min: usize, got: usize },
}

pub type Result<T, E = EmbeddingError> = std::result::Result<T, E>;

/// One dense vector per node, all of width `dim`.
///
/// Components are stored as `f32`, matching the binary on-disk format, so the
/// text and binary loaders produce identical stores. Arithmetic is in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<NodeId, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(EmbeddingError::BadDim { min: 1, got: 0 });
        }
        Ok(Self {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, id: NodeId, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(EmbeddingError::DimMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if self.vectors.insert(id, vector).is_some() {
            return Err(EmbeddingError::Duplicate(id));
        }
        Ok(())
    }

    pub fn get(&self, id: NodeId) -> Option<&[f32]> {
        self.vectors.get(&id).map(Vec::as_slice)
    }

    pub fn vector(&self, id: NodeId) -> Result<&[f32]> {
        self.get(id).ok_or(EmbeddingError::Missing(id))
    }

    /// `(id, vector)` pairs in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[f32])> {
        self.vectors.iter().map(|(&id, v)| (id, v.as_slice()))
    }

    /// Fails naming the first graph node (ascending id) without a vector.
    pub fn check_covers(&self, graph: &KnowledgeGraph) -> Result<()> {
        match graph.node_ids().find(|id| !self.vectors.contains_key(id)) {
            Some(id) => Err(EmbeddingError::Missing(id)),
            None => Ok(()),
        }
    }

    /// Hash-embeds every node's [`node_text`].
    pub fn hashed(graph: &KnowledgeGraph, dim: usize) -> Result<Self> {
        let mut store = Self::new(dim)?;
        for node in graph.nodes() {
            let v = hash_embedder(node_text(node), dim)?;
            store.insert(node.id, v.into_iter().map(|x| x as f32).collect())?;
        }
        Ok(store)
    }

    /// Copy restricted to the given ids; ids without vectors are skipped.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a NodeId>) -> Self {
        let vectors = ids
            .into_iter()
            .filter_map(|id| self.vectors.get(id).map(|v| (*id, v.clone())))
            .collect();
        Self {
            dim: self.dim,
            vectors,
        }
    }
}

/// Text a node is embedded from: its description, or its name when the
/// description is empty.
pub fn node_text(node: &NodeRecord) -> &str {
    if node.description.is_empty() {
        &node.name
    } else {
        &node.description
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryEmbedding {
    pub vector: Vec<f64>,
    pub source_text: String,
}

impl QueryEmbedding {
    pub fn hashed(text: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            vector: hash_embedder(text, dim)?,
            source_text: text.to_string(),
        })
    }
}

fn norm<T: Copy + Into<f64>>(v: &[T]) -> f64 {
    v.iter().map(|&x| x.into() * x.into()).sum::<f64>().sqrt()
}

pub fn cosine_similarity<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    if a.len() != b.len() {
        return Err(EmbeddingError::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x.into() * y.into()).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Descending similarity, ties by ascending id.
pub fn rank_order(a: &(NodeId, f64), b: &(NodeId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Query similarity of each listed node, in the order given.
pub fn similarities<'a>(
    store: &EmbeddingStore,
    query: &QueryEmbedding,
    ids: impl IntoIterator<Item = &'a NodeId>,
) -> Result<Vec<(NodeId, f64)>> {
    ids.into_iter()
        .map(|&id| {
            let v = store.vector(id)?;
            cosine_similarity(v, &query.vector)
                .map(|s| (id, s))
                .map_err(|e| match e {
                    EmbeddingError::ZeroNorm if norm(v) == 0.0 => EmbeddingError::ZeroNormNode(id),
                    other => other,
                })
        })
        .collect()
}

/// The `k` nodes most similar to `query`, optionally only among `restrict`.
pub fn top_k_similar(
    store: &EmbeddingStore,
    query: &QueryEmbedding,
    k: usize,
    restrict: Option<&BTreeSet<NodeId>>,
) -> Result<Vec<(NodeId, f64)>> {
    if k == 0 {
        return Err(EmbeddingError::ZeroK);
    }
    let mut scored = match restrict {
        Some(set) if set.is_empty() => return Err(EmbeddingError::EmptyRestriction),
        Some(set) => similarities(store, query, set)?,
        None => similarities(store, query, store.vectors.keys())?,
    };
    scored.sort_by(rank_order);
    scored.truncate(k);
    Ok(scored)
}
