//! Relevance sets derived from synonymy: a word and its synonyms describe
//! the same concept, so any of them is a correct answer for a description
//! of that word.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use crate::lexicon::Lexicon;
use crate::{DefinitionId, WordId};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GroundTruthError {
    #[error("unknown word {0}")]
    UnknownWord(WordId),
    #[error("definition {definition_id} does not belong to word {word_id}")]
    DefinitionWordMismatch {
        word_id: WordId,
        definition_id: DefinitionId,
    },
}

/// `relevant[w] = {w} ∪ synonyms(w)` for every word of a lexicon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    relevant: BTreeMap<WordId, BTreeSet<WordId>>,
}

impl GroundTruth {
    pub fn relevant(&self, word: WordId) -> Option<&BTreeSet<WordId>> {
        self.relevant.get(&word)
    }

    pub fn is_relevant(&self, query_word: WordId, candidate: WordId) -> bool {
        self.relevant
            .get(&query_word)
            .is_some_and(|s| s.contains(&candidate))
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &BTreeSet<WordId>)> {
        self.relevant.iter().map(|(&w, s)| (w, s))
    }

    /// `word_id<TAB>id,id,...` per line, ascending.
    pub fn write_tsv(&self, out: &mut impl Write) -> io::Result<()> {
        for (w, set) in &self.relevant {
            let ids: Vec<String> = set.iter().map(u64::to_string).collect();
            writeln!(out, "{w}\t{}", ids.join(","))?;
        }
        Ok(())
    }
}

pub fn build_ground_truth(lexicon: &Lexicon) -> GroundTruth {
    let relevant = lexicon
        .words()
        .map(|w| {
            let mut set: BTreeSet<WordId> = lexicon.synonyms_of(w.word_id).iter().copied().collect();
            set.insert(w.word_id);
            (w.word_id, set)
        })
        .collect();
    GroundTruth { relevant }
}

/// Relevant words for a query definition that can actually be retrieved once
/// the query definition itself is excluded: those with at least one other
/// definition. Its size is the denominator of average precision.
pub fn retrievable_relevant_set(
    gt: &GroundTruth,
    query_word: WordId,
    query_definition: DefinitionId,
    lexicon: &Lexicon,
) -> Result<BTreeSet<WordId>, GroundTruthError> {
    let relevant = gt
        .relevant(query_word)
        .ok_or(GroundTruthError::UnknownWord(query_word))?;
    match lexicon.definition(query_definition) {
        Some(d) if d.word_id == query_word => {}
        _ => {
            return Err(GroundTruthError::DefinitionWordMismatch {
                word_id: query_word,
                definition_id: query_definition,
            })
        }
    }
    Ok(relevant
        .iter()
        .copied()
        .filter(|&w| {
            lexicon
                .definitions_of(w)
                .iter()
                .any(|&d| d != query_definition)
        })
        .collect())
}
