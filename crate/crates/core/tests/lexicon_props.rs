mod support;

use std::collections::BTreeSet;
use std::fs;

use proptest::prelude::*;
use sonahunt_core::ground_truth::{build_ground_truth, retrievable_relevant_set};
use sonahunt_core::lexicon::{
    filter_eligible_queries, lexicon_stats, load_lexicon, mirror_synonyms, LexiconError, SynonymRelation,
};
use sonahunt_core::Lexicon;

/// Word count, definitions per word and raw relations over those words.
fn lexicon_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<(u64, u64)>)> {
    (1usize..25).prop_flat_map(|n| {
        (
            proptest::collection::vec(1usize..4, n),
            proptest::collection::vec((1..=n as u64, 1..=n as u64), 0..40),
        )
    })
}

fn relation_set(lex: &Lexicon) -> BTreeSet<(u64, u64)> {
    lex.synonyms().iter().map(|r| (r.source, r.target)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mirroring_is_idempotent_and_symmetric(
        rels in proptest::collection::vec((0u64..30, 0u64..30), 0..60)
    ) {
        let rels: Vec<SynonymRelation> = rels.into_iter().map(|(a, b)| SynonymRelation::new(a, b)).collect();
        let once = mirror_synonyms(&rels);
        prop_assert_eq!(mirror_synonyms(&once), once.clone());
        let set: BTreeSet<(u64, u64)> = once.iter().map(|r| (r.source, r.target)).collect();
        for &(a, b) in &set {
            prop_assert!(set.contains(&(b, a)));
        }
        for r in &rels {
            prop_assert!(set.contains(&(r.source, r.target)));
        }
    }

    #[test]
    fn finalized_lexicon_is_symmetric((defs, rels) in lexicon_strategy()) {
        let lex = support::lexicon(&defs, &rels);
        let set = relation_set(&lex);
        for &(a, b) in &set {
            prop_assert!(a != b);
            prop_assert!(set.contains(&(b, a)));
            prop_assert!(lex.synonyms_of(a).contains(&b));
        }
        let stats = lexicon_stats(&lex);
        prop_assert!(stats.mirrored_synonym_count >= stats.raw_synonym_count);
        prop_assert!(stats.mirrored_synonym_count <= 2 * stats.raw_synonym_count);
    }

    #[test]
    fn store_round_trip((defs, rels) in lexicon_strategy()) {
        let lex = support::lexicon(&defs, &rels);
        let tmp = tempfile::tempdir().unwrap();
        lex.save(tmp.path()).unwrap();
        let back = Lexicon::open(tmp.path()).unwrap();
        prop_assert_eq!(&back, &lex);
        prop_assert_eq!(lexicon_stats(&back), lexicon_stats(&lex));
        for w in lex.words() {
            prop_assert_eq!(back.definitions_of(w.word_id), lex.definitions_of(w.word_id));
            prop_assert_eq!(back.synonyms_of(w.word_id), lex.synonyms_of(w.word_id));
        }
    }

    #[test]
    fn eligibility((defs, rels) in lexicon_strategy()) {
        let lex = support::lexicon(&defs, &rels);
        let all: BTreeSet<u64> = lex.definitions().map(|d| d.definition_id).collect();
        let eligible = filter_eligible_queries(&lex);
        prop_assert!(eligible.is_subset(&all));

        let gt = build_ground_truth(&lex);
        for d in lex.definitions() {
            let retrievable = retrievable_relevant_set(&gt, d.word_id, d.definition_id, &lex).unwrap();
            prop_assert_eq!(!retrievable.is_empty(), eligible.contains(&d.definition_id));
        }

        let collapsed = support::lexicon(&vec![1; defs.len()], &[]);
        prop_assert!(filter_eligible_queries(&collapsed).is_empty());
    }

    #[test]
    fn ground_truth_shape((defs, rels) in lexicon_strategy()) {
        let lex = support::lexicon(&defs, &rels);
        let gt = build_ground_truth(&lex);
        let set = relation_set(&lex);
        for w in lex.words() {
            let rel = gt.relevant(w.word_id).unwrap();
            prop_assert!(rel.contains(&w.word_id));
            prop_assert_eq!(rel.len(), 1 + lex.synonyms_of(w.word_id).len());
            for &s in rel {
                prop_assert!(gt.is_relevant(s, w.word_id));
                if s != w.word_id {
                    prop_assert!(set.contains(&(w.word_id, s)));
                }
            }
        }
    }
}

#[test]
fn one_directional_fixture_doubles_under_mirroring() {
    let rels: Vec<(u64, u64)> = (1..=20).map(|i| (2 * i - 1, 2 * i)).collect();
    let lex = support::lexicon(&[1; 40], &rels);
    let stats = lexicon_stats(&lex);
    assert_eq!(stats.raw_synonym_count, 20);
    assert_eq!(stats.mirrored_synonym_count, 40);
    assert_eq!(stats.avg_synonyms_per_word, 1.0);
}

#[test]
fn load_from_files_with_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name);
    fs::write(p("words.tsv"), "1\tet\tkass\n2\tet\tkiisu\n3\tet\tkoer\n").unwrap();
    fs::write(
        p("definitions.tsv"),
        "10\t1\tet\tväike koduloom\n11\t1\ten\ta small pet\n20\t2\tet\tkass\n30\t3\tet\tkoduloom\n",
    )
    .unwrap();
    fs::write(
        p("synonyms.tsv"),
        "1\t2\n2\t1\n1\t1\n1\t2\n3\t1\tsense-word\n",
    )
    .unwrap();
    let lex = load_lexicon(&p("words.tsv"), &p("definitions.tsv"), &p("synonyms.tsv")).unwrap();
    assert_eq!(lex.word_count(), 3);
    assert_eq!(lex.definition_count(), 4);
    assert_eq!(lex.synonyms_of(1), &[2]);
    assert_eq!(lex.synonyms_of(3), &[] as &[u64]);
    let w = lex.warnings();
    assert_eq!(w.self_synonyms, 1);
    assert_eq!(w.non_word_relations, 1);
    assert!(w.duplicate_synonyms >= 1);
    let stats = lexicon_stats(&lex);
    assert_eq!(stats.definition_count_by_language["en"], 1);
    assert_eq!(stats.mirrored_synonym_count, 2);
    assert_eq!(filter_eligible_queries(&lex), [10, 11, 20].into());

    fs::write(p("definitions.tsv"), "10\t9\tet\tgloss\n").unwrap();
    assert!(matches!(
        load_lexicon(&p("words.tsv"), &p("definitions.tsv"), &p("synonyms.tsv")),
        Err(LexiconError::DanglingReference { .. })
    ));
}
