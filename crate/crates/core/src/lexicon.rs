//! Words, definitions and word-to-word synonymy.
//!
//! Input comes from three tab-separated files (see `docs/FORMATS.md`):
//!
//! ```text
//! words:        word_id <TAB> language <TAB> surface
//! definitions:  definition_id <TAB> word_id <TAB> language <TAB> text
//! synonyms:     source_word_id <TAB> target_word_id [<TAB> relation_type]
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. Synonym links in
//! dictionary dumps are often one-directional; a finalized [`Lexicon`] always
//! holds the symmetric closure of the raw links.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{DefinitionId, WordId};

/// Name of the store file inside a lexicon directory.
pub const STORE_FILE: &str = "lexicon.store";

const STORE_HEADER: &str = "# sonahunt lexicon store v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordEntry {
    pub word_id: WordId,
    pub surface: String,
    pub language: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefinitionEntry {
    pub definition_id: DefinitionId,
    pub word_id: WordId,
    pub text: String,
    pub language: String,
}

/// A directed word-to-word synonymy link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SynonymRelation {
    pub source: WordId,
    pub target: WordId,
}

impl SynonymRelation {
    pub fn new(source: WordId, target: WordId) -> Self {
        Self { source, target }
    }

    pub fn reversed(self) -> Self {
        Self::new(self.target, self.source)
    }
}

/// Where a record came from, for error reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    pub line: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{at}: malformed {field}: {reason}")]
    MalformedRecord {
        at: Location,
        field: &'static str,
        reason: String,
    },
    #[error("{at}: {kind} references unknown word_id {word_id}")]
    DanglingReference {
        at: Location,
        kind: &'static str,
        word_id: WordId,
    },
    #[error("{at}: duplicate {kind} id {id}")]
    DuplicateId {
        at: Location,
        kind: &'static str,
        id: u64,
    },
    #[error("word {word_id} has no definitions")]
    WordWithoutDefinition { word_id: WordId },
}

impl LexiconError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Records dropped (not rejected) while building a lexicon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadWarnings {
    /// `(A, A)` links.
    pub self_synonyms: usize,
    /// Sense-to-word and sense-to-sense links.
    pub non_word_relations: usize,
    /// Exact repeats of an already seen directed link.
    pub duplicate_synonyms: usize,
}

impl LoadWarnings {
    pub fn total(&self) -> usize {
        self.self_synonyms + self.non_word_relations + self.duplicate_synonyms
    }
}

/// A finalized, immutable dictionary.
#[derive(Debug, Clone)]
pub struct Lexicon {
    words: BTreeMap<WordId, WordEntry>,
    definitions: BTreeMap<DefinitionId, DefinitionEntry>,
    /// Deduplicated input links, self-loops removed.
    raw_synonyms: Vec<SynonymRelation>,
    /// Symmetric closure of `raw_synonyms`.
    synonyms: Vec<SynonymRelation>,
    word_definitions: HashMap<WordId, Vec<DefinitionId>>,
    word_synonyms: HashMap<WordId, Vec<WordId>>,
    warnings: LoadWarnings,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words
            && self.definitions == other.definitions
            && self.raw_synonyms == other.raw_synonyms
            && self.synonyms == other.synonyms
    }
}

impl Lexicon {
    /// Builds a lexicon from in-memory records. Record positions stand in for
    /// line numbers in errors.
    pub fn from_records(
        words: impl IntoIterator<Item = WordEntry>,
        definitions: impl IntoIterator<Item = DefinitionEntry>,
        synonyms: impl IntoIterator<Item = SynonymRelation>,
    ) -> Result<Self, LexiconError> {
        let mut builder = LexiconBuilder::default();
        for (i, w) in words.into_iter().enumerate() {
            builder.add_word(w, || memory_location("words", i))?;
        }
        for (i, d) in definitions.into_iter().enumerate() {
            builder.add_definition(d, || memory_location("definitions", i))?;
        }
        for (i, s) in synonyms.into_iter().enumerate() {
            builder.add_synonym(s, || memory_location("synonyms", i))?;
        }
        builder.finish()
    }

    pub fn words(&self) -> impl Iterator<Item = &WordEntry> {
        self.words.values()
    }

    pub fn definitions(&self) -> impl Iterator<Item = &DefinitionEntry> {
        self.definitions.values()
    }

    pub fn word(&self, id: WordId) -> Option<&WordEntry> {
        self.words.get(&id)
    }

    pub fn definition(&self, id: DefinitionId) -> Option<&DefinitionEntry> {
        self.definitions.get(&id)
    }

    /// Definition ids of `word`, ascending.
    pub fn definitions_of(&self, word: WordId) -> &[DefinitionId] {
        self.word_definitions
            .get(&word)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Synonyms of `word` in the mirrored relation, ascending.
    pub fn synonyms_of(&self, word: WordId) -> &[WordId] {
        self.word_synonyms
            .get(&word)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// The mirrored (symmetric) relation, sorted.
    pub fn synonyms(&self) -> &[SynonymRelation] {
        &self.synonyms
    }

    /// Deduplicated input relation before mirroring, sorted.
    pub fn raw_synonyms(&self) -> &[SynonymRelation] {
        &self.raw_synonyms
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn definition_count(&self) -> usize {
        self.definitions.len()
    }

    pub fn warnings(&self) -> LoadWarnings {
        self.warnings
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Writes the lexicon to `dir/lexicon.store`, creating `dir` if needed.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, LexiconError> {
        fs::create_dir_all(dir).map_err(|e| LexiconError::io(dir, e))?;
        let path = dir.join(STORE_FILE);
        let file = fs::File::create(&path).map_err(|e| LexiconError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        self.write_store(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| LexiconError::io(&path, e))?;
        Ok(path)
    }

    fn write_store(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "{STORE_HEADER}")?;
        writeln!(out, "[words]")?;
        for w in self.words.values() {
            writeln!(out, "{}\t{}\t{}", w.word_id, w.language, w.surface)?;
        }
        writeln!(out, "[definitions]")?;
        for d in self.definitions.values() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                d.definition_id, d.word_id, d.language, d.text
            )?;
        }
        writeln!(out, "[synonyms]")?;
        for s in &self.raw_synonyms {
            writeln!(out, "{}\t{}", s.source, s.target)?;
        }
        Ok(())
    }

    /// Opens a store previously written by [`Lexicon::save`].
    pub fn open(dir: &Path) -> Result<Self, LexiconError> {
        let path = dir.join(STORE_FILE);
        let file = fs::File::open(&path).map_err(|e| LexiconError::io(&path, e))?;
        let name = path.display().to_string();
        let mut builder = LexiconBuilder::default();
        let mut section = "";
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LexiconError::io(&path, e))?;
            let at = || Location {
                file: name.clone(),
                line: idx + 1,
            };
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[words]" | "[definitions]" | "[synonyms]" => {
                    section = match line {
                        "[words]" => "words",
                        "[definitions]" => "definitions",
                        _ => "synonyms",
                    };
                    continue;
                }
                _ => {}
            }
            match section {
                "words" => builder.add_word(parse_word(line, &at)?, at)?,
                "definitions" => builder.add_definition(parse_definition(line, &at)?, at)?,
                "synonyms" => {
                    if let Some(rel) = parse_synonym(line, &at)? {
                        builder.add_synonym(rel, at)?;
                    }
                }
                _ => {
                    return Err(LexiconError::MalformedRecord {
                        at: at(),
                        field: "section",
                        reason: "record outside of a [words]/[definitions]/[synonyms] section"
                            .into(),
                    })
                }
            }
        }
        builder.finish()
    }
}

fn memory_location(kind: &str, index: usize) -> Location {
    Location {
        file: format!("<{kind}>"),
        line: index + 1,
    }
}

#[derive(Default)]
struct LexiconBuilder {
    words: BTreeMap<WordId, WordEntry>,
    definitions: BTreeMap<DefinitionId, DefinitionEntry>,
    synonyms: BTreeSet<SynonymRelation>,
    warnings: LoadWarnings,
}

impl LexiconBuilder {
    fn add_word(
        &mut self,
        mut word: WordEntry,
        at: impl Fn() -> Location,
    ) -> Result<(), LexiconError> {
        let surface = word.surface.trim();
        if surface.is_empty() {
            return Err(LexiconError::MalformedRecord {
                at: at(),
                field: "surface",
                reason: "empty surface form".into(),
            });
        }
        if surface.len() != word.surface.len() {
            word.surface = surface.to_owned();
        }
        check_language(&word.language, "language", &at)?;
        if self.words.contains_key(&word.word_id) {
            return Err(LexiconError::DuplicateId {
                at: at(),
                kind: "word",
                id: word.word_id,
            });
        }
        self.words.insert(word.word_id, word);
        Ok(())
    }

    fn add_definition(
        &mut self,
        def: DefinitionEntry,
        at: impl Fn() -> Location,
    ) -> Result<(), LexiconError> {
        if def.text.trim().is_empty() {
            return Err(LexiconError::MalformedRecord {
                at: at(),
                field: "text",
                reason: "empty definition text".into(),
            });
        }
        check_language(&def.language, "language", &at)?;
        if !self.words.contains_key(&def.word_id) {
            return Err(LexiconError::DanglingReference {
                at: at(),
                kind: "definition",
                word_id: def.word_id,
            });
        }
        if self.definitions.contains_key(&def.definition_id) {
            return Err(LexiconError::DuplicateId {
                at: at(),
                kind: "definition",
                id: def.definition_id,
            });
        }
        self.definitions.insert(def.definition_id, def);
        Ok(())
    }

    fn add_synonym(
        &mut self,
        rel: SynonymRelation,
        at: impl Fn() -> Location,
    ) -> Result<(), LexiconError> {
        for id in [rel.source, rel.target] {
            if !self.words.contains_key(&id) {
                return Err(LexiconError::DanglingReference {
                    at: at(),
                    kind: "synonym",
                    word_id: id,
                });
            }
        }
        if rel.source == rel.target {
            self.warnings.self_synonyms += 1;
            return Ok(());
        }
        if !self.synonyms.insert(rel) {
            self.warnings.duplicate_synonyms += 1;
        }
        Ok(())
    }

    fn finish(self) -> Result<Lexicon, LexiconError> {
        let mut word_definitions: HashMap<WordId, Vec<DefinitionId>> = HashMap::new();
        for d in self.definitions.values() {
            word_definitions
                .entry(d.word_id)
                .or_default()
                .push(d.definition_id);
        }
        if let Some(&word_id) = self
            .words
            .keys()
            .find(|id| !word_definitions.contains_key(id))
        {
            return Err(LexiconError::WordWithoutDefinition { word_id });
        }

        let raw_synonyms: Vec<_> = self.synonyms.into_iter().collect();
        let synonyms = mirror_synonyms(&raw_synonyms);
        let mut word_synonyms: HashMap<WordId, Vec<WordId>> = HashMap::new();
        for s in &synonyms {
            word_synonyms.entry(s.source).or_default().push(s.target);
        }

        if self.warnings.total() > 0 {
            log::warn!(
                "lexicon: dropped {} self-synonyms, {} non word-to-word relations, {} duplicate links",
                self.warnings.self_synonyms,
                self.warnings.non_word_relations,
                self.warnings.duplicate_synonyms
            );
        }

        Ok(Lexicon {
            words: self.words,
            definitions: self.definitions,
            raw_synonyms,
            synonyms,
            word_definitions,
            word_synonyms,
            warnings: self.warnings,
        })
    }
}

fn check_language(
    code: &str,
    field: &'static str,
    at: impl Fn() -> Location,
) -> Result<(), LexiconError> {
    let ok = (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
    if ok {
        Ok(())
    } else {
        Err(LexiconError::MalformedRecord {
            at: at(),
            field,
            reason: format!("{code:?} is not a lowercase ISO-639 code"),
        })
    }
}

fn split_fields<'a>(
    line: &'a str,
    expected: &[usize],
    record: &'static str,
    at: impl Fn() -> Location,
) -> Result<Vec<&'a str>, LexiconError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if expected.contains(&fields.len()) {
        Ok(fields)
    } else {
        Err(LexiconError::MalformedRecord {
            at: at(),
            field: record,
            reason: format!(
                "expected {} tab-separated fields, found {}",
                expected
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(" or "),
                fields.len()
            ),
        })
    }
}

fn parse_id(
    raw: &str,
    field: &'static str,
    at: impl Fn() -> Location,
) -> Result<u64, LexiconError> {
    raw.trim()
        .parse::<u64>()
        .map_err(|e| LexiconError::MalformedRecord {
            at: at(),
            field,
            reason: format!("{raw:?}: {e}"),
        })
}

fn parse_word(line: &str, at: &impl Fn() -> Location) -> Result<WordEntry, LexiconError> {
    let f = split_fields(line, &[3], "word record", at)?;
    Ok(WordEntry {
        word_id: parse_id(f[0], "word_id", at)?,
        language: f[1].trim().to_owned(),
        surface: f[2].to_owned(),
    })
}

fn parse_definition(
    line: &str,
    at: &impl Fn() -> Location,
) -> Result<DefinitionEntry, LexiconError> {
    let f = split_fields(line, &[4], "definition record", at)?;
    Ok(DefinitionEntry {
        definition_id: parse_id(f[0], "definition_id", at)?,
        word_id: parse_id(f[1], "word_id", at)?,
        language: f[2].trim().to_owned(),
        text: f[3].to_owned(),
    })
}

/// `Ok(None)` for relation types other than word-to-word.
fn parse_synonym(
    line: &str,
    at: &impl Fn() -> Location,
) -> Result<Option<SynonymRelation>, LexiconError> {
    let f = split_fields(line, &[2, 3], "synonym record", at)?;
    let rel = SynonymRelation::new(
        parse_id(f[0], "source_word_id", at)?,
        parse_id(f[1], "target_word_id", at)?,
    );
    match f.get(2).map(|t| t.trim()) {
        None | Some("") | Some("word") | Some("word-word") => Ok(Some(rel)),
        Some(_) => Ok(None),
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, LexiconError> {
    let file = fs::File::open(path).map_err(|e| LexiconError::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let mut line = line.map_err(|e| LexiconError::io(path, e))?;
        if line.ends_with('\r') {
            line.pop();
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push((idx + 1, line));
    }
    Ok(out)
}

/// Loads and finalizes a lexicon from the three record files.
pub fn load_lexicon(
    words_path: &Path,
    definitions_path: &Path,
    synonyms_path: &Path,
) -> Result<Lexicon, LexiconError> {
    let mut builder = LexiconBuilder::default();

    let name = words_path.display().to_string();
    for (line_no, line) in read_lines(words_path)? {
        let at = || Location {
            file: name.clone(),
            line: line_no,
        };
        builder.add_word(parse_word(&line, &at)?, at)?;
    }

    let name = definitions_path.display().to_string();
    for (line_no, line) in read_lines(definitions_path)? {
        let at = || Location {
            file: name.clone(),
            line: line_no,
        };
        builder.add_definition(parse_definition(&line, &at)?, at)?;
    }

    let name = synonyms_path.display().to_string();
    for (line_no, line) in read_lines(synonyms_path)? {
        let at = || Location {
            file: name.clone(),
            line: line_no,
        };
        match parse_synonym(&line, &at)? {
            Some(rel) => builder.add_synonym(rel, at)?,
            None => builder.warnings.non_word_relations += 1,
        }
    }

    builder.finish()
}

/// Symmetric closure of `relations`, deduplicated and sorted.
pub fn mirror_synonyms(relations: &[SynonymRelation]) -> Vec<SynonymRelation> {
    relations
        .iter()
        .flat_map(|&r| [r, r.reversed()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LexiconStats {
    pub word_count: usize,
    pub definition_count_by_language: BTreeMap<String, usize>,
    pub raw_synonym_count: usize,
    pub mirrored_synonym_count: usize,
    /// Mirrored links per word that takes part in at least one link.
    pub avg_synonyms_per_word: f64,
}

impl LexiconStats {
    pub fn definition_count(&self) -> usize {
        self.definition_count_by_language.values().sum()
    }
}

impl fmt::Display for LexiconStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "words={}", self.word_count)?;
        writeln!(f, "definitions={}", self.definition_count())?;
        for (lang, n) in &self.definition_count_by_language {
            writeln!(f, "definitions[{lang}]={n}")?;
        }
        writeln!(f, "synonyms={}", self.raw_synonym_count)?;
        writeln!(f, "mirrored_synonyms={}", self.mirrored_synonym_count)?;
        write!(f, "synonyms_per_word={:.4}", self.avg_synonyms_per_word)
    }
}

pub fn lexicon_stats(lexicon: &Lexicon) -> LexiconStats {
    let mut by_language = BTreeMap::new();
    for d in lexicon.definitions() {
        *by_language.entry(d.language.clone()).or_insert(0) += 1;
    }
    let mirrored = lexicon.synonyms().len();
    let linked_words = lexicon.word_synonyms.len();
    LexiconStats {
        word_count: lexicon.word_count(),
        definition_count_by_language: by_language,
        raw_synonym_count: lexicon.raw_synonyms().len(),
        mirrored_synonym_count: mirrored,
        avg_synonyms_per_word: if linked_words == 0 {
            0.0
        } else {
            mirrored as f64 / linked_words as f64
        },
    }
}

/// Definitions usable as unlabeled queries: those whose word has another
/// definition or at least one synonym.
pub fn filter_eligible_queries(lexicon: &Lexicon) -> BTreeSet<DefinitionId> {
    lexicon
        .definitions()
        .filter(|d| {
            lexicon.definitions_of(d.word_id).len() >= 2
                || !lexicon.synonyms_of(d.word_id).is_empty()
        })
        .map(|d| d.definition_id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(id: WordId, surface: &str) -> WordEntry {
        WordEntry {
            word_id: id,
            surface: surface.into(),
            language: "et".into(),
        }
    }

    fn def(id: DefinitionId, word_id: WordId, text: &str) -> DefinitionEntry {
        DefinitionEntry {
            definition_id: id,
            word_id,
            text: text.into(),
            language: "et".into(),
        }
    }

    fn rel(a: WordId, b: WordId) -> SynonymRelation {
        SynonymRelation::new(a, b)
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn sample_files(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        (
            write(
                dir,
                "words.tsv",
                "# id lang surface\n1\tet\tkoer\n2\tet\tpeni\n\n3\tet\tkass\n",
            ),
            write(
                dir,
                "definitions.tsv",
                "10\t1\tet\tkodune neljajalgne loom\n11\t1\ten\ta domestic dog\n20\t2\tet\tkoer\n30\t3\tet\tnurruv loom\n",
            ),
            write(dir, "synonyms.tsv", "1\t2\n2\t1\n"),
        )
    }

    #[test]
    fn loads_small_lexicon() {
        let tmp = tempfile::tempdir().unwrap();
        let (w, d, s) = sample_files(tmp.path());
        let lex = load_lexicon(&w, &d, &s).unwrap();
        assert_eq!(lex.word_count(), 3);
        assert_eq!(lex.definition_count(), 4);
        assert_eq!(lex.definitions_of(1), &[10, 11]);
        assert_eq!(lex.definitions_of(2), &[20]);
        assert_eq!(lex.definitions_of(3), &[30]);
        assert_eq!(lex.synonyms_of(1), &[2]);
        assert_eq!(lex.synonyms_of(2), &[1]);
        assert!(lex.synonyms_of(3).is_empty());
        assert_eq!(lex.warnings(), LoadWarnings::default());
    }

    #[test]
    fn unknown_word_in_definitions_is_dangling() {
        let tmp = tempfile::tempdir().unwrap();
        let (w, _, s) = sample_files(tmp.path());
        let d = write(tmp.path(), "bad.tsv", "10\t1\tet\tx\n11\t999\tet\ty\n");
        match load_lexicon(&w, &d, &s) {
            Err(LexiconError::DanglingReference { at, word_id, kind }) => {
                assert_eq!(word_id, 999);
                assert_eq!(at.line, 2);
                assert_eq!(kind, "definition");
            }
            other => panic!("expected DanglingReference, got {other:?}"),
        }
    }

    #[test]
    fn unknown_word_in_synonyms_is_dangling() {
        let tmp = tempfile::tempdir().unwrap();
        let (w, d, _) = sample_files(tmp.path());
        let s = write(tmp.path(), "bad.tsv", "1\t2\n1\t42\n");
        let err = load_lexicon(&w, &d, &s).unwrap_err();
        assert!(matches!(
            err,
            LexiconError::DanglingReference { word_id: 42, kind: "synonym", .. }
        ));
    }

    #[test]
    fn malformed_record_reports_line_and_field() {
        let tmp = tempfile::tempdir().unwrap();
        let (_, d, s) = sample_files(tmp.path());
        let w = write(tmp.path(), "bad.tsv", "1\tet\tkoer\n\n2x\tet\tpeni\n");
        match load_lexicon(&w, &d, &s) {
            Err(LexiconError::MalformedRecord { at, field, .. }) => {
                assert_eq!(at.line, 3);
                assert_eq!(field, "word_id");
            }
            other => panic!("expected MalformedRecord, got {other:?}"),
        }
        let w = write(tmp.path(), "bad2.tsv", "1\tet\n");
        let err = load_lexicon(&w, &d, &s).unwrap_err();
        assert!(matches!(err, LexiconError::MalformedRecord { field: "word record", .. }));
        let w = write(tmp.path(), "bad3.tsv", "1\tet\t   \n");
        let err = load_lexicon(&w, &d, &s).unwrap_err();
        assert!(matches!(err, LexiconError::MalformedRecord { field: "surface", .. }));
        let w = write(tmp.path(), "bad4.tsv", "1\tEstonian\tkoer\n");
        let err = load_lexicon(&w, &d, &s).unwrap_err();
        assert!(matches!(err, LexiconError::MalformedRecord { field: "language", .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Lexicon::from_records([word(1, "a"), word(1, "b")], [], []).unwrap_err();
        assert!(matches!(err, LexiconError::DuplicateId { kind: "word", id: 1, .. }));
        let err = Lexicon::from_records([word(1, "a")], [def(5, 1, "x"), def(5, 1, "y")], [])
            .unwrap_err();
        assert!(matches!(err, LexiconError::DuplicateId { kind: "definition", id: 5, .. }));
    }

    #[test]
    fn word_without_definition_rejected() {
        let err = Lexicon::from_records([word(1, "a"), word(2, "b")], [def(5, 1, "x")], [])
            .unwrap_err();
        assert!(matches!(err, LexiconError::WordWithoutDefinition { word_id: 2 }));
    }

    #[test]
    fn self_synonyms_and_duplicates_are_dropped_with_warnings() {
        let lex = Lexicon::from_records(
            [word(1, "a"), word(2, "b")],
            [def(10, 1, "x"), def(20, 2, "y")],
            [rel(1, 1), rel(1, 2), rel(1, 2)],
        )
        .unwrap();
        assert_eq!(lex.raw_synonyms(), &[rel(1, 2)]);
        assert_eq!(lex.synonyms(), &[rel(1, 2), rel(2, 1)]);
        let w = lex.warnings();
        assert_eq!(w.self_synonyms, 1);
        assert_eq!(w.duplicate_synonyms, 1);
    }

    #[test]
    fn non_word_relation_types_are_skipped() {
        let tmp = tempfile::tempdir().unwrap();
        let (w, d, _) = sample_files(tmp.path());
        let s = write(
            tmp.path(),
            "typed.tsv",
            "1\t2\tword\n1\t3\tsense-word\n2\t3\tsense-sense\n",
        );
        let lex = load_lexicon(&w, &d, &s).unwrap();
        assert_eq!(lex.raw_synonyms(), &[rel(1, 2)]);
        assert_eq!(lex.warnings().non_word_relations, 2);
    }

    #[test]
    fn mirror_examples() {
        assert_eq!(mirror_synonyms(&[rel(1, 2)]), vec![rel(1, 2), rel(2, 1)]);
        assert_eq!(
            mirror_synonyms(&[rel(1, 2), rel(2, 1)]),
            vec![rel(1, 2), rel(2, 1)]
        );
        assert!(mirror_synonyms(&[]).is_empty());
    }

    #[test]
    fn stats_on_empty_synonyms() {
        let lex = Lexicon::from_records([word(1, "a")], [def(10, 1, "x")], []).unwrap();
        let stats = lexicon_stats(&lex);
        assert_eq!(stats.mirrored_synonym_count, 0);
        assert_eq!(stats.raw_synonym_count, 0);
        assert_eq!(stats.avg_synonyms_per_word, 0.0);
    }

    #[test]
    fn stats_on_three_word_star() {
        // A=1, B=2, C=3 with {(A,B),(B,A),(A,C),(C,A)}.
        let lex = Lexicon::from_records(
            [word(1, "a"), word(2, "b"), word(3, "c")],
            [def(10, 1, "x"), def(20, 2, "y"), def(30, 3, "z")],
            [rel(1, 2), rel(2, 1), rel(1, 3), rel(3, 1)],
        )
        .unwrap();
        let stats = lexicon_stats(&lex);
        assert_eq!(stats.word_count, 3);
        assert_eq!(stats.mirrored_synonym_count, 4);
        assert_eq!(stats.raw_synonym_count, 4);
        assert!((stats.avg_synonyms_per_word - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(stats.definition_count_by_language.get("et"), Some(&3));
    }

    #[test]
    fn eligibility_rules() {
        // 1: one def, no synonyms -> excluded
        // 2: two defs, no synonyms -> both included
        // 3, 4: one def each, synonyms of each other -> included
        let lex = Lexicon::from_records(
            [word(1, "a"), word(2, "b"), word(3, "c"), word(4, "d")],
            [
                def(10, 1, "x"),
                def(20, 2, "y"),
                def(21, 2, "y2"),
                def(30, 3, "z"),
                def(40, 4, "w"),
            ],
            [rel(3, 4)],
        )
        .unwrap();
        let eligible = filter_eligible_queries(&lex);
        assert_eq!(eligible.into_iter().collect::<Vec<_>>(), vec![20, 21, 30, 40]);
    }

    #[test]
    fn store_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let (w, d, s) = sample_files(tmp.path());
        let lex = load_lexicon(&w, &d, &s).unwrap();
        let store_dir = tmp.path().join("store");
        lex.save(&store_dir).unwrap();
        let again = Lexicon::open(&store_dir).unwrap();
        assert_eq!(lex, again);
        assert_eq!(lexicon_stats(&lex), lexicon_stats(&again));
        for w in lex.words() {
            assert_eq!(lex.definitions_of(w.word_id), again.definitions_of(w.word_id));
            assert_eq!(lex.synonyms_of(w.word_id), again.synonyms_of(w.word_id));
        }
    }

    #[test]
    fn open_missing_store_is_io_error() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            Lexicon::open(tmp.path()),
            Err(LexiconError::Io { .. })
        ));
    }
}
