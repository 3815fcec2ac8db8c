//! The two evaluation protocols.
//!
//! **Unlabeled**: every eligible dictionary definition is used as a query
//! against the index holding all definitions. Its own hit is removed, hits are
//! collapsed to words, and the ranking is judged against the query word plus
//! its synonyms.
//!
//! **Labeled**: external descriptions with a known target word and sense are
//! embedded and searched; the target word and its synonyms are relevant.
//! Reports are produced per description language.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::ann::{HnswIndex, IndexError, SearchHit};
use crate::embedding::{normalize, EmbeddingError, EmbeddingSet, QueryEmbedder};
use crate::ground_truth::{retrievable_relevant_set, GroundTruth, GroundTruthError};
use crate::lexicon::{filter_eligible_queries, Lexicon};
use crate::metrics::{aggregate, EvalReport, JudgedQuery, MetricsError, QueryJudgment, RankedResult, RESULT_LIMIT};
use crate::{DefinitionId, WordId};

pub const DEFAULT_CANDIDATES: usize = RESULT_LIMIT;
pub const DEFAULT_FETCH_MULTIPLIER: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no embedding for eligible definition {0}")]
    MissingEmbedding(DefinitionId),
    #[error("labeled item at line {line}: target word {word_id} / definition {definition_id}: {reason}")]
    MissingTarget {
        line: usize,
        word_id: WordId,
        definition_id: DefinitionId,
        reason: &'static str,
    },
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("{}:{line}: {reason}", path.display())]
    MalformedDataset {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    GroundTruth(#[from] GroundTruthError),
}

/// Which definitions may serve as unlabeled queries, by definition language.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum QueryLanguageFilter {
    #[default]
    All,
    Only(String),
    Except(String),
}

impl QueryLanguageFilter {
    /// Cross-lingual setting: only definitions not written in Estonian.
    pub fn non_estonian() -> Self {
        Self::Except("et".into())
    }

    pub fn accepts(&self, language: &str) -> bool {
        match self {
            Self::All => true,
            Self::Only(l) => l == language,
            Self::Except(l) => l != language,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnlabeledEvalConfig {
    /// Words kept per query after deduplication.
    pub candidates: usize,
    /// Definition hits fetched per kept word before deduplication.
    pub fetch_multiplier: usize,
    pub query_language_filter: QueryLanguageFilter,
    /// Beam width; the index's own `ef_search` when `None`.
    pub ef_search: Option<usize>,
    /// Use the exact scan instead of the graph.
    pub exact: bool,
}

impl Default for UnlabeledEvalConfig {
    fn default() -> Self {
        Self {
            candidates: DEFAULT_CANDIDATES,
            fetch_multiplier: DEFAULT_FETCH_MULTIPLIER,
            query_language_filter: QueryLanguageFilter::All,
            ef_search: None,
            exact: false,
        }
    }
}

impl UnlabeledEvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(1..=RESULT_LIMIT).contains(&self.candidates) {
            return Err(EvalError::InvalidConfig(format!(
                "candidates must be in 1..={RESULT_LIMIT}, got {}",
                self.candidates
            )));
        }
        if self.fetch_multiplier == 0 {
            return Err(EvalError::InvalidConfig("fetch_multiplier must be >= 1".into()));
        }
        if self.ef_search == Some(0) {
            return Err(EvalError::InvalidConfig("ef_search must be >= 1".into()));
        }
        Ok(())
    }

    fn fetch(&self) -> usize {
        self.candidates * self.fetch_multiplier
    }

    fn retrieve(&self, index: &HnswIndex, query: &crate::EmbeddingVector, k: usize) -> Result<Vec<SearchHit>, IndexError> {
        if self.exact {
            index.exact_search(query, k, None)
        } else {
            let ef = self.ef_search.unwrap_or(index.params().ef_search).max(k);
            index.search(query, k, ef, None)
        }
    }
}

/// First (best) hit of each word, in order, at most `limit` of them.
pub fn dedup_hits(hits: &[SearchHit], limit: usize) -> Vec<&SearchHit> {
    let mut seen = HashSet::new();
    hits.iter()
        .filter(|h| seen.insert(h.payload.word_id))
        .take(limit)
        .collect()
}

/// Collapses definition hits into a word ranking.
pub fn dedup_to_words(query_id: u64, hits: &[SearchHit], limit: usize) -> RankedResult {
    let words = dedup_hits(hits, limit.min(RESULT_LIMIT))
        .into_iter()
        .map(|h| h.payload.word_id)
        .collect();
    RankedResult::new(query_id, words).expect("deduplicated and capped")
}

/// Runs the unlabeled protocol over all eligible definitions accepted by the
/// config's language filter.
pub fn run_unlabeled_eval(
    index: &HnswIndex,
    lexicon: &Lexicon,
    gt: &GroundTruth,
    embeddings: &EmbeddingSet,
    cfg: &UnlabeledEvalConfig,
) -> Result<EvalReport, EvalError> {
    let judged = judge_unlabeled(index, lexicon, gt, embeddings, cfg)?;
    Ok(aggregate(&judged)?)
}

/// Per-query judgments of the unlabeled protocol, ordered by definition id.
pub fn judge_unlabeled(
    index: &HnswIndex,
    lexicon: &Lexicon,
    gt: &GroundTruth,
    embeddings: &EmbeddingSet,
    cfg: &UnlabeledEvalConfig,
) -> Result<Vec<JudgedQuery>, EvalError> {
    cfg.validate()?;
    let queries: Vec<(DefinitionId, WordId)> = filter_eligible_queries(lexicon)
        .into_iter()
        .filter_map(|id| lexicon.definition(id))
        .filter(|d| cfg.query_language_filter.accepts(&d.language))
        .map(|d| (d.definition_id, d.word_id))
        .collect();
    if let Some(&(missing, _)) = queries.iter().find(|(id, _)| embeddings.get(*id).is_none()) {
        return Err(EvalError::MissingEmbedding(missing));
    }
    log::info!("unlabeled eval: {} queries", queries.len());

    queries
        .par_iter()
        .map(|&(def_id, word_id)| -> Result<JudgedQuery, EvalError> {
            let vector = normalize(embeddings.get(def_id).expect("checked above"))?;
            let hits = cfg.retrieve(index, &vector, cfg.fetch() + 1)?;
            let hits: Vec<SearchHit> = hits
                .into_iter()
                .filter(|h| h.payload.definition_id != def_id)
                .collect();
            let ranked = dedup_to_words(def_id, &hits, cfg.candidates);
            let relevant = gt
                .relevant(word_id)
                .ok_or(GroundTruthError::UnknownWord(word_id))?
                .clone();
            let rel_size = retrievable_relevant_set(gt, word_id, def_id, lexicon)?.len();
            Ok(JudgedQuery {
                judgment: QueryJudgment::new(ranked, relevant),
                rel_size,
                linked_sense: None,
            })
        })
        .collect()
}

/// One description with its gold word and sense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledItem {
    pub query_text: String,
    pub query_language: String,
    pub target_word_id: WordId,
    pub target_definition_id: DefinitionId,
    /// 1-based line in the dataset file, 0 for in-memory items.
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledDataset {
    pub items: Vec<LabeledItem>,
}

impl LabeledDataset {
    pub fn new(items: Vec<LabeledItem>) -> Self {
        Self { items }
    }

    /// Reads `target_word_id<TAB>target_definition_id<TAB>query_language<TAB>query_text`
    /// records. A target may appear once per language.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let io_err = |source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        };
        let malformed = |line: usize, reason: String| EvalError::MalformedDataset {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let file = fs::File::open(path).map_err(io_err)?;
        let mut items = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(io_err)?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(malformed(line_no, format!("expected 4 tab-separated fields, found {}", f.len())));
            }
            let parse = |s: &str, name: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| malformed(line_no, format!("{name} {s:?}: {e}")))
            };
            let item = LabeledItem {
                target_word_id: parse(f[0], "target_word_id")?,
                target_definition_id: parse(f[1], "target_definition_id")?,
                query_language: f[2].trim().to_owned(),
                query_text: f[3].to_owned(),
                line: line_no,
            };
            if item.query_language.is_empty() || item.query_text.trim().is_empty() {
                return Err(malformed(line_no, "empty language or query text".into()));
            }
            if !seen.insert((item.target_word_id, item.target_definition_id, item.query_language.clone())) {
                return Err(malformed(
                    line_no,
                    format!("duplicate item for word {} in language {}", item.target_word_id, item.query_language),
                ));
            }
            items.push(item);
        }
        Ok(Self { items })
    }

    pub fn languages(&self) -> BTreeSet<&str> {
        self.items.iter().map(|i| i.query_language.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEvalOutcome {
    /// One report per query language.
    pub reports: BTreeMap<String, EvalReport>,
    /// Items whose description could not be embedded.
    pub skipped: usize,
}

/// Runs the labeled protocol. Items are queried without self-exclusion;
/// relevance is the target word or any of its synonyms.
pub fn run_labeled_eval(
    index: &HnswIndex,
    lexicon: &Lexicon,
    gt: &GroundTruth,
    dataset: &LabeledDataset,
    embedder: &dyn QueryEmbedder,
    cfg: &UnlabeledEvalConfig,
) -> Result<LabeledEvalOutcome, EvalError> {
    cfg.validate()?;
    if !index.is_empty() && embedder.dim() != index.dim() {
        return Err(IndexError::DimMismatch {
            expected: index.dim(),
            found: embedder.dim(),
        }
        .into());
    }
    let indexed = |w: WordId| lexicon.definitions_of(w).iter().any(|&d| index.contains_definition(d));

    for item in &dataset.items {
        let missing = |reason| EvalError::MissingTarget {
            line: item.line,
            word_id: item.target_word_id,
            definition_id: item.target_definition_id,
            reason,
        };
        if lexicon.word(item.target_word_id).is_none() {
            return Err(missing("word not in lexicon"));
        }
        match lexicon.definition(item.target_definition_id) {
            Some(d) if d.word_id == item.target_word_id => {}
            Some(_) => return Err(missing("definition belongs to another word")),
            None => return Err(missing("definition not in lexicon")),
        }
        if !indexed(item.target_word_id) {
            return Err(missing("word has no indexed definition"));
        }
    }

    let results: Vec<Option<(String, JudgedQuery)>> = dataset
        .items
        .par_iter()
        .enumerate()
        .map(|(pos, item)| -> Result<Option<(String, JudgedQuery)>, EvalError> {
            let vector = match embedder.embed(&item.query_text) {
                Ok(v) => v,
                Err(e) => {
                    log::warn!("labeled item at line {}: skipped, cannot embed query: {e}", item.line);
                    return Ok(None);
                }
            };
            let hits = cfg.retrieve(index, &vector, cfg.fetch())?;
            let best = dedup_hits(&hits, cfg.candidates);
            let linked_sense = best
                .iter()
                .find(|h| h.payload.word_id == item.target_word_id)
                .map(|h| h.payload.definition_id == item.target_definition_id)
                .unwrap_or(false);
            let query_id = if item.line > 0 { item.line as u64 } else { pos as u64 };
            let ranked = dedup_to_words(query_id, &hits, cfg.candidates);
            let relevant = gt
                .relevant(item.target_word_id)
                .ok_or(GroundTruthError::UnknownWord(item.target_word_id))?
                .clone();
            let rel_size = relevant.iter().filter(|&&w| indexed(w)).count();
            Ok(Some((
                item.query_language.clone(),
                JudgedQuery {
                    judgment: QueryJudgment::new(ranked, relevant),
                    rel_size,
                    linked_sense: Some(linked_sense),
                },
            )))
        })
        .collect::<Result<_, _>>()?;

    let skipped = results.iter().filter(|r| r.is_none()).count();
    let mut by_language: BTreeMap<String, Vec<JudgedQuery>> = BTreeMap::new();
    for (lang, judged) in results.into_iter().flatten() {
        by_language.entry(lang).or_default().push(judged);
    }
    let reports = by_language
        .into_iter()
        .map(|(lang, judged)| aggregate(&judged).map(|r| (lang, r)))
        .collect::<Result<_, _>>()?;
    Ok(LabeledEvalOutcome { reports, skipped })
}
