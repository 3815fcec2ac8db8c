#![allow(dead_code)]

use sonahunt_core::ann::{IndexedPoint, Payload};
use sonahunt_core::embedding::{hash_embedder, AveragingEmbedder};
use sonahunt_core::lexicon::{DefinitionEntry, SynonymRelation, WordEntry};
use sonahunt_core::{HnswIndex, HnswParams, Lexicon, QueryEmbedder, WordVectorTable};
use sonahunt_service::ServiceState;

pub const DIM: usize = 32;
pub const LANGS: [&str; 3] = ["et", "en", "ru"];

/// 150 words with two definitions each in rotating languages, adjacent words
/// linked as synonyms. Definition `d` has text `gloss d` and embeds to
/// `hash_embedder("gloss d", DIM, 1)`. The word table knows `gloss` and the
/// tokens `w0`..`w149`.
pub fn state() -> ServiceState {
    let words: Vec<WordEntry> = (0..150)
        .map(|i| WordEntry {
            word_id: i,
            surface: format!("sõna-{i}"),
            language: "et".into(),
        })
        .collect();
    let defs: Vec<DefinitionEntry> = (0..300)
        .map(|d| DefinitionEntry {
            definition_id: d,
            word_id: d / 2,
            text: format!("gloss {d}"),
            language: LANGS[(d % 3) as usize].into(),
        })
        .collect();
    let rels = (0..75).map(|i| SynonymRelation::new(2 * i, 2 * i + 1));
    let lexicon = Lexicon::from_records(words, defs, rels).unwrap();
    let points: Vec<IndexedPoint> = lexicon
        .definitions()
        .map(|d| IndexedPoint {
            vector: hash_embedder(&d.text, DIM, 1),
            payload: Payload {
                definition_id: d.definition_id,
                word_id: d.word_id,
                language: d.language.clone(),
            },
        })
        .collect();
    let index = HnswIndex::build(
        &points,
        HnswParams {
            m: 8,
            ef_construction: 64,
            ef_search: 32,
            seed: 2,
        },
    )
    .unwrap();
    let table = WordVectorTable::new(
        DIM,
        std::iter::once("gloss".to_string())
            .chain((0..150).map(|i| format!("w{i}")))
            .map(|t| {
                let v = hash_embedder(&t, DIM, 9);
                (t, v)
            }),
    )
    .unwrap();
    ServiceState {
        index,
        lexicon,
        embedder: Some(Box::new(AveragingEmbedder::new(table)) as Box<dyn QueryEmbedder>),
    }
}

pub fn vector_of(definition_id: u64) -> Vec<f32> {
    hash_embedder(&format!("gloss {definition_id}"), DIM, 1).into_inner()
}
