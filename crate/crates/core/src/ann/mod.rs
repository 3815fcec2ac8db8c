//! Approximate nearest-neighbour search over unit vectors.
//!
//! [`HnswIndex`] is a hierarchical navigable small-world graph with a
//! metadata payload per point and filtered search. [`brute_force_search`]
//! is the exact reference used to measure recall.
//!
//! Similarity is the inner product of normalized vectors (cosine). Every
//! ranking in this module orders by descending score and breaks ties by
//! ascending `definition_id`.

mod hnsw;
mod io;

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::embedding::{dot, EmbeddingVector};
use crate::{DefinitionId, WordId};

pub use hnsw::HnswIndex;
pub use io::{load_index, serialize_index, INDEX_FORMAT_VERSION, INDEX_MAGIC};

/// Metadata stored alongside each vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Payload {
    pub definition_id: DefinitionId,
    pub word_id: WordId,
    pub language: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedPoint {
    pub vector: EmbeddingVector,
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HnswParams {
    /// Maximum out-degree on layers above 0; layer 0 allows `2 * m`.
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    /// Seed for level sampling.
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
            ef_search: 128,
            seed: 42,
        }
    }
}

impl HnswParams {
    pub fn validate(&self) -> Result<(), IndexError> {
        if self.m < 2 {
            return Err(IndexError::InvalidParams(format!("m must be >= 2, got {}", self.m)));
        }
        if self.ef_construction < self.m {
            return Err(IndexError::InvalidParams(format!(
                "ef_construction ({}) must be >= m ({})",
                self.ef_construction, self.m
            )));
        }
        if self.ef_search == 0 {
            return Err(IndexError::InvalidParams("ef_search must be >= 1".into()));
        }
        Ok(())
    }

    /// Degree cap at `level`.
    pub fn max_degree(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.m
        } else {
            self.m
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub payload: Payload,
    /// Cosine similarity in `[-1, 1]`.
    pub score: f32,
}

/// Predicate over payloads applied during search.
pub type PayloadFilter<'a> = &'a (dyn Fn(&Payload) -> bool + Sync);

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("invalid HNSW parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: index has {expected}, got {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("duplicate definition id {0}")]
    DuplicateDefinitionId(DefinitionId),
    #[error("vector is not unit length (norm {norm}){}", definition_id.map(|d| format!(" for definition {d}")).unwrap_or_default())]
    UnnormalizedVector {
        definition_id: Option<DefinitionId>,
        norm: f32,
    },
    #[error("index I/O failed: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("unsupported index format: {0}")]
    VersionMismatch(String),
    #[error("corrupt index file: {0}")]
    Corrupt(String),
}

/// Search-order comparison: `Less` means `a` ranks before `b`.
pub(crate) fn rank_cmp(a_score: f32, a_id: DefinitionId, b_score: f32, b_id: DefinitionId) -> Ordering {
    b_score.total_cmp(&a_score).then(a_id.cmp(&b_id))
}

pub(crate) fn check_query(query: &EmbeddingVector, dim: usize) -> Result<(), IndexError> {
    if query.dim() != dim {
        return Err(IndexError::DimMismatch {
            expected: dim,
            found: query.dim(),
        });
    }
    if !query.is_normalized() {
        return Err(IndexError::UnnormalizedVector {
            definition_id: None,
            norm: query.norm(),
        });
    }
    Ok(())
}

/// Exact top-`k` by cosine over `points`, restricted to `filter` if given.
pub fn brute_force_search(
    points: &[IndexedPoint],
    query: &EmbeddingVector,
    k: usize,
    filter: Option<PayloadFilter<'_>>,
) -> Result<Vec<SearchHit>, IndexError> {
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    check_query(query, first.vector.dim())?;
    let mut scored: Vec<(f32, &IndexedPoint)> = points
        .iter()
        .filter(|p| filter.is_none_or(|f| f(&p.payload)))
        .map(|p| {
            if p.vector.dim() != query.dim() {
                return Err(IndexError::DimMismatch {
                    expected: query.dim(),
                    found: p.vector.dim(),
                });
            }
            Ok((dot(query.as_slice(), p.vector.as_slice()), p))
        })
        .collect::<Result<_, _>>()?;
    let cmp = |a: &(f32, &IndexedPoint), b: &(f32, &IndexedPoint)| {
        rank_cmp(a.0, a.1.payload.definition_id, b.0, b.1.payload.definition_id)
    };
    if k < scored.len() {
        scored.select_nth_unstable_by(k, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    Ok(scored
        .into_iter()
        .map(|(score, p)| SearchHit {
            payload: p.payload.clone(),
            score,
        })
        .collect())
}

/// Fraction of the exact top-`k` definition ids present in the approximate
/// top-`k`.
pub fn recall_at_k(approx: &[SearchHit], exact: &[SearchHit], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let truth: HashSet<DefinitionId> = exact
        .iter()
        .take(k)
        .map(|h| h.payload.definition_id)
        .collect();
    let found = approx
        .iter()
        .take(k)
        .filter(|h| truth.contains(&h.payload.definition_id))
        .count();
    found as f64 / k as f64
}
