#![allow(dead_code)]

pub mod naive;

use sonahunt_core::ann::{IndexedPoint, Payload};
use sonahunt_core::embedding::hash_embedder;
use sonahunt_core::lexicon::{DefinitionEntry, SynonymRelation, WordEntry};
use sonahunt_core::Lexicon;

pub fn word(id: u64) -> WordEntry {
    WordEntry {
        word_id: id,
        surface: format!("w{id}"),
        language: "et".into(),
    }
}

pub fn definition(id: u64, word_id: u64, text: &str, language: &str) -> DefinitionEntry {
    DefinitionEntry {
        definition_id: id,
        word_id,
        text: text.into(),
        language: language.into(),
    }
}

/// Lexicon with `defs_per_word[i]` definitions for word `i + 1` and the given
/// raw relations (self-loops are dropped by the loader).
pub fn lexicon(defs_per_word: &[usize], relations: &[(u64, u64)]) -> Lexicon {
    let words = (1..=defs_per_word.len() as u64).map(word);
    let mut next = 100;
    let mut defs = Vec::new();
    for (i, &n) in defs_per_word.iter().enumerate() {
        for _ in 0..n {
            defs.push(definition(next, i as u64 + 1, &format!("gloss {next}"), "et"));
            next += 1;
        }
    }
    let rels = relations.iter().map(|&(a, b)| SynonymRelation::new(a, b));
    Lexicon::from_records(words, defs, rels).expect("valid fixture")
}

pub fn random_points(n: usize, dim: usize, seed: u64) -> Vec<IndexedPoint> {
    (0..n)
        .map(|i| IndexedPoint {
            vector: hash_embedder(&format!("point {i}"), dim, seed),
            payload: Payload {
                definition_id: i as u64,
                word_id: i as u64 / 3,
                language: ["et", "en", "ru"][i % 3].into(),
            },
        })
        .collect()
}

/// 200 words in 100 synonym pairs; both definitions of a pair share one
/// text, so they embed to the same vector. `noise` unrelated words follow.
/// Every second pair member's definition is tagged `en` when `bilingual`.
pub fn pair_fixture(noise: usize, bilingual: bool) -> Lexicon {
    let total = 200 + noise as u64;
    let words = (1..=total).map(word);
    let defs = (1..=total).map(|w| {
        let text = if w <= 200 {
            format!("pair gloss {}", w.div_ceil(2))
        } else {
            format!("noise gloss {w}")
        };
        let language = if bilingual && w % 2 == 0 { "en" } else { "et" };
        definition(1000 + w, w, &text, language)
    });
    let rels = (1..=100).map(|i| SynonymRelation::new(2 * i - 1, 2 * i));
    Lexicon::from_records(words, defs, rels).expect("valid fixture")
}

pub fn hash_embeddings(lex: &Lexicon, dim: usize, seed: u64) -> sonahunt_core::EmbeddingSet {
    let mut set = sonahunt_core::EmbeddingSet::new(dim, "hash");
    for d in lex.definitions() {
        set.insert(d.definition_id, hash_embedder(&d.text, dim, seed)).unwrap();
    }
    set
}

pub fn index_points(lex: &Lexicon, set: &sonahunt_core::EmbeddingSet) -> Vec<IndexedPoint> {
    lex.definitions()
        .map(|d| IndexedPoint {
            vector: set.get(d.definition_id).unwrap().clone(),
            payload: Payload {
                definition_id: d.definition_id,
                word_id: d.word_id,
                language: d.language.clone(),
            },
        })
        .collect()
}
