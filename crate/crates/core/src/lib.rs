//! Core of the `sonahunt` reverse dictionary.
//!
//! A reverse dictionary answers "describe a word, get the word": dictionary
//! definitions are embedded as dense vectors, stored in an HNSW graph index
//! together with their word and language metadata, and a user's description
//! is embedded the same way and used as a nearest-neighbour query.
//!
//! The crate is split along the data flow:
//!
//! - [`lexicon`]: words, definitions and symmetric synonymy, file ingestion
//!   and the single-file lexicon store.
//! - [`embedding`]: vectors, precomputed embedding files, the whitespace
//!   averaging embedder and a deterministic hash embedder.
//! - [`ann`]: the HNSW index with payload filtering and an exact oracle.
//! - [`ground_truth`]: synonymy-derived relevance sets.
//! - [`metrics`]: P@k, AP, RR, Acc@k, capped first-relevant rank and their
//!   aggregation into an [`metrics::EvalReport`].
//! - [`eval`]: the unlabeled (dictionary-as-queries) and labeled protocols.

pub mod ann;
pub mod embedding;
pub mod eval;
pub mod ground_truth;
pub mod lexicon;
pub mod metrics;

pub use ann::{HnswIndex, HnswParams, IndexedPoint, Payload, SearchHit};
pub use embedding::{EmbeddingSet, EmbeddingVector, QueryEmbedder, WordVectorTable};
pub use ground_truth::GroundTruth;
pub use lexicon::{Lexicon, LexiconStats};
pub use metrics::EvalReport;

/// Identifier of a headword.
pub type WordId = u64;

/// Identifier of a single definition (sense gloss).
pub type DefinitionId = u64;
