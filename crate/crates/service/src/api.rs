//! Request and response shapes and the transport-independent handlers.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sonahunt_core::ann::Payload;
use sonahunt_core::embedding::{normalize, EmbeddingError};
use sonahunt_core::eval::{dedup_hits, DEFAULT_FETCH_MULTIPLIER};
use sonahunt_core::metrics::RESULT_LIMIT;
use sonahunt_core::{DefinitionId, EmbeddingVector, HnswIndex, Lexicon, QueryEmbedder, WordId};

pub const DEFAULT_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(default)]
    pub query: Option<String>,
    #[serde(default)]
    pub query_vector: Option<Vec<f32>>,
    /// Restricts candidate definitions to this language.
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHitView {
    pub rank: usize,
    pub word_id: WordId,
    pub word_surface: String,
    pub score: f32,
    pub matched_definition_id: DefinitionId,
    pub matched_definition_text: String,
    pub matched_definition_language: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub hits: Vec<SearchHitView>,
    pub timing_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitionView {
    pub definition_id: DefinitionId,
    pub language: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynonymView {
    pub word_id: WordId,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordDetail {
    pub word_id: WordId,
    pub surface: String,
    pub language: String,
    pub definitions: Vec<DefinitionView>,
    pub synonyms: Vec<SynonymView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    EmbeddingFailure(String),
    NotReady,
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> u16 {
        match self {
            Self::BadRequest(_) => 400,
            Self::NotFound(_) => 404,
            Self::EmbeddingFailure(_) => 422,
            Self::NotReady => 503,
            Self::Internal(_) => 500,
        }
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadRequest(m) | Self::NotFound(m) | Self::EmbeddingFailure(m) | Self::Internal(m) => {
                f.write_str(m)
            }
            Self::NotReady => f.write_str("index is still loading"),
        }
    }
}

/// Everything a request needs, immutable once loaded.
pub struct ServiceState {
    pub index: HnswIndex,
    pub lexicon: Lexicon,
    /// Text queries are rejected when absent; vector queries still work.
    pub embedder: Option<Box<dyn QueryEmbedder>>,
}

impl fmt::Debug for ServiceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServiceState")
            .field("points", &self.index.len())
            .field("words", &self.lexicon.word_count())
            .field("embedder", &self.embedder.as_ref().map(|e| e.dim()))
            .finish()
    }
}

fn valid_language(code: &str) -> bool {
    (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase())
}

fn query_vector(state: &ServiceState, req: &SearchRequest) -> Result<EmbeddingVector, ApiError> {
    match (&req.query, &req.query_vector) {
        (Some(_), Some(_)) => Err(ApiError::BadRequest(
            "give either `query` or `query_vector`, not both".into(),
        )),
        (None, None) => Err(ApiError::BadRequest("one of `query` or `query_vector` is required".into())),
        (Some(text), None) => {
            let embedder = state.embedder.as_ref().ok_or_else(|| {
                ApiError::EmbeddingFailure("text queries need a word-vector table; send `query_vector`".into())
            })?;
            embedder
                .embed(text)
                .map_err(|e| ApiError::EmbeddingFailure(e.to_string()))
        }
        (None, Some(raw)) => {
            if raw.len() != state.index.dim() {
                return Err(ApiError::BadRequest(format!(
                    "query_vector has {} components, index dimension is {}",
                    raw.len(),
                    state.index.dim()
                )));
            }
            let v = EmbeddingVector::new(raw.clone()).map_err(|e| ApiError::BadRequest(e.to_string()))?;
            normalize(&v).map_err(|e| match e {
                EmbeddingError::ZeroVector => ApiError::BadRequest("query_vector is all zeros".into()),
                other => ApiError::BadRequest(other.to_string()),
            })
        }
    }
}

/// Embeds or takes the query vector, searches, keeps the best definition per
/// word and joins surfaces and texts.
pub fn handle_search(state: &ServiceState, req: &SearchRequest) -> Result<SearchResponse, ApiError> {
    let started = Instant::now();
    let limit = req.limit.unwrap_or(DEFAULT_LIMIT);
    if !(1..=RESULT_LIMIT).contains(&limit) {
        return Err(ApiError::BadRequest(format!("limit must be in 1..={RESULT_LIMIT}, got {limit}")));
    }
    if let Some(lang) = &req.language {
        if !valid_language(lang) {
            return Err(ApiError::BadRequest(format!("language {lang:?} is not an ISO-639 code")));
        }
    }
    let query = query_vector(state, req)?;
    if state.index.is_empty() {
        return Ok(SearchResponse {
            hits: Vec::new(),
            timing_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    let k = limit * DEFAULT_FETCH_MULTIPLIER;
    let ef = state.index.params().ef_search.max(k);
    let lang_filter = req.language.clone().map(|l| move |p: &Payload| p.language == l);
    let hits = match &lang_filter {
        Some(f) => state.index.search(&query, k, ef, Some(f)),
        None => state.index.search(&query, k, ef, None),
    }
    .map_err(|e| ApiError::Internal(e.to_string()))?;

    let hits = dedup_hits(&hits, limit)
        .into_iter()
        .enumerate()
        .map(|(i, h)| {
            let word = state.lexicon.word(h.payload.word_id);
            let def = state.lexicon.definition(h.payload.definition_id);
            SearchHitView {
                rank: i + 1,
                word_id: h.payload.word_id,
                word_surface: word.map(|w| w.surface.clone()).unwrap_or_default(),
                score: h.score,
                matched_definition_id: h.payload.definition_id,
                matched_definition_text: def.map(|d| d.text.clone()).unwrap_or_default(),
                matched_definition_language: h.payload.language.clone(),
            }
        })
        .collect();
    Ok(SearchResponse {
        hits,
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn handle_word(state: &ServiceState, id: WordId) -> Result<WordDetail, ApiError> {
    let lex = &state.lexicon;
    let word = lex
        .word(id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown word id {id}")))?;
    let definitions = lex
        .definitions_of(id)
        .iter()
        .filter_map(|&d| lex.definition(d))
        .map(|d| DefinitionView {
            definition_id: d.definition_id,
            language: d.language.clone(),
            text: d.text.clone(),
        })
        .collect();
    let synonyms = lex
        .synonyms_of(id)
        .iter()
        .filter_map(|&s| lex.word(s))
        .map(|w| SynonymView {
            word_id: w.word_id,
            surface: w.surface.clone(),
        })
        .collect();
    Ok(WordDetail {
        word_id: word.word_id,
        surface: word.surface.clone(),
        language: word.language.clone(),
        definitions,
        synonyms,
    })
}

pub fn health(state: Option<&ServiceState>) -> Health {
    match state {
        Some(s) => Health {
            status: "ok".into(),
            points: Some(s.index.len()),
            dim: Some(s.index.dim()),
        },
        None => Health {
            status: "loading".into(),
            points: None,
            dim: None,
        },
    }
}
