//! Dense vectors and the ways to obtain them.
//!
//! Neural encoders run offline; their output reaches the index through the
//! binary embedding file (`EMB1`). Two embedders run in-process: the
//! whitespace-token averaging baseline over a static word-vector table, and a
//! seeded hash embedder used for fixtures and tests.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::DefinitionId;

/// Tolerance on the Euclidean norm of a normalized vector.
pub const NORM_TOLERANCE: f32 = 1e-5;

const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("vector has no components")]
    Empty,
    #[error("vector component {index} is not finite")]
    NonFinite { index: usize },
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("text is empty")]
    EmptyText,
    #[error("none of the tokens are in the vocabulary")]
    AllTokensOutOfVocabulary,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("not an embedding file (bad magic)")]
    BadMagic,
    #[error("embedding file truncated: {0}")]
    TruncatedFile(String),
    #[error("duplicate definition id {0} in embedding set")]
    DuplicateId(DefinitionId),
    #[error("word-vector table line {line}: {reason}")]
    MalformedTable { line: usize, reason: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

/// A finite, non-empty `f32` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(components: Vec<f32>) -> Result<Self, EmbeddingError> {
        if components.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(EmbeddingError::NonFinite { index });
        }
        Ok(Self(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f32 {
        self.0
            .iter()
            .map(|&c| f64::from(c) * f64::from(c))
            .sum::<f64>()
            .sqrt() as f32
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn dot(&self, other: &Self) -> f32 {
        dot(&self.0, &other.0)
    }

    pub fn normalized(&self) -> Result<Self, EmbeddingError> {
        normalize(self)
    }
}

/// Inner product. The single similarity kernel shared by the graph search and
/// the exact oracle, so that both produce bit-identical scores.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f32; 16];
    let chunks_a = a.chunks_exact(16);
    let chunks_b = b.chunks_exact(16);
    let tail: f32 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for i in 0..16 {
            acc[i] += ca[i] * cb[i];
        }
    }
    let mut lanes = [0f32; 4];
    for (i, v) in acc.iter().enumerate() {
        lanes[i % 4] += v;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// Scales `v` to unit Euclidean norm.
pub fn normalize(v: &EmbeddingVector) -> Result<EmbeddingVector, EmbeddingError> {
    let norm = v
        .0
        .iter()
        .map(|&c| f64::from(c) * f64::from(c))
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    EmbeddingVector::new(v.0.iter().map(|&c| (f64::from(c) / norm) as f32).collect())
}

/// Static token → vector table (e.g. a Word2Vec export).
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    dim: usize,
    vocabulary: HashMap<String, EmbeddingVector>,
}

impl WordVectorTable {
    pub fn new(
        dim: usize,
        entries: impl IntoIterator<Item = (String, EmbeddingVector)>,
    ) -> Result<Self, EmbeddingError> {
        let mut vocabulary = HashMap::new();
        for (token, v) in entries {
            if v.dim() != dim {
                return Err(EmbeddingError::DimMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
            vocabulary.insert(token, v);
        }
        Ok(Self { dim, vocabulary })
    }

    /// Reads the word2vec text format: a `<vocab_size> <dim>` header, then
    /// one `token c1 ... cdim` line per entry.
    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let io_err = |source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::open(path).map_err(io_err)?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .transpose()
            .map_err(io_err)?
            .ok_or_else(|| EmbeddingError::MalformedTable {
                line: 1,
                reason: "missing header".into(),
            })?;
        let mut parts = header.split_whitespace();
        let mut header_field = |name: &str| -> Result<usize, EmbeddingError> {
            parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| EmbeddingError::MalformedTable {
                    line: 1,
                    reason: format!("header needs `<vocab_size> <dim>`, bad {name}"),
                })
        };
        let vocab_size = header_field("vocab_size")?;
        let dim = header_field("dim")?;
        if dim == 0 {
            return Err(EmbeddingError::MalformedTable {
                line: 1,
                reason: "dim must be positive".into(),
            });
        }

        let mut vocabulary = HashMap::with_capacity(vocab_size);
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default().to_owned();
            let components = parts
                .map(|s| s.parse::<f32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbeddingError::MalformedTable {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            if components.len() != dim {
                return Err(EmbeddingError::MalformedTable {
                    line: line_no,
                    reason: format!("expected {dim} components, found {}", components.len()),
                });
            }
            let v = EmbeddingVector::new(components).map_err(|e| EmbeddingError::MalformedTable {
                line: line_no,
                reason: e.to_string(),
            })?;
            vocabulary.insert(token, v);
        }
        if vocabulary.len() != vocab_size {
            log::warn!(
                "{}: header announces {vocab_size} tokens, read {}",
                path.display(),
                vocabulary.len()
            );
        }
        Ok(Self { dim, vocabulary })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&EmbeddingVector> {
        self.vocabulary.get(token)
    }
}

/// Mean of the in-vocabulary whitespace tokens of `text`, normalized.
///
/// Out-of-vocabulary tokens are ignored. Tokens are summed in sorted order so
/// the result does not depend on word order at the bit level.
pub fn embed_average(text: &str, table: &WordVectorTable) -> Result<EmbeddingVector, EmbeddingError> {
    if text.trim().is_empty() {
        return Err(EmbeddingError::EmptyText);
    }
    let mut tokens: Vec<&str> = text.split_whitespace().collect();
    tokens.sort_unstable();

    let mut sum = vec![0f64; table.dim()];
    let mut found = 0usize;
    for token in tokens {
        if let Some(v) = table.get(token) {
            found += 1;
            for (s, &c) in sum.iter_mut().zip(v.as_slice()) {
                *s += f64::from(c);
            }
        }
    }
    if found == 0 {
        return Err(EmbeddingError::AllTokensOutOfVocabulary);
    }
    let mean = sum.iter().map(|s| (s / found as f64) as f32).collect();
    normalize(&EmbeddingVector::new(mean)?)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic pseudo-embedding: a Gaussian vector seeded from `(text,
/// seed)`, normalized. Equal texts map to equal vectors; unrelated texts are
/// nearly orthogonal in high dimensions.
pub fn hash_embedder(text: &str, dim: usize, seed: u64) -> EmbeddingVector {
    assert!(dim >= 2, "hash embedder needs dim >= 2");
    let stream = splitmix64(fnv1a(text.as_bytes()) ^ splitmix64(seed));
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    loop {
        let components: Vec<f32> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        if let Ok(v) = normalize(&EmbeddingVector(components)) {
            return v;
        }
    }
}

/// Produces query vectors from free text.
pub trait QueryEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError>;
}

/// Whitespace averaging over a [`WordVectorTable`].
#[derive(Debug, Clone)]
pub struct AveragingEmbedder {
    table: WordVectorTable,
}

impl AveragingEmbedder {
    pub fn new(table: WordVectorTable) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &WordVectorTable {
        &self.table
    }
}

impl QueryEmbedder for AveragingEmbedder {
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        embed_average(text, &self.table)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl QueryEmbedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        if text.trim().is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        Ok(hash_embedder(text, self.dim, self.seed))
    }
}

/// Precomputed definition vectors of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    entries: BTreeMap<DefinitionId, EmbeddingVector>,
    /// Not stored in the file; [`load_embedding_set`] uses the file stem.
    pub model_name: String,
}

impl EmbeddingSet {
    pub fn new(dim: usize, model_name: impl Into<String>) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
            model_name: model_name.into(),
        }
    }

    pub fn insert(&mut self, id: DefinitionId, v: EmbeddingVector) -> Result<(), EmbeddingError> {
        if v.dim() != self.dim {
            return Err(EmbeddingError::DimMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        if self.entries.contains_key(&id) {
            return Err(EmbeddingError::DuplicateId(id));
        }
        self.entries.insert(id, v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: DefinitionId) -> Option<&EmbeddingVector> {
        self.entries.get(&id)
    }

    /// Entries in ascending definition id order.
    pub fn iter(&self) -> impl Iterator<Item = (DefinitionId, &EmbeddingVector)> {
        self.entries.iter().map(|(&id, v)| (id, v))
    }
}

/// Writes `set` in the `EMB1` little-endian format, records in ascending id
/// order.
pub fn write_embedding_set(set: &EmbeddingSet, path: &Path) -> Result<(), EmbeddingError> {
    let io_err = |source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dim = u32::try_from(set.dim).map_err(|_| EmbeddingError::DimMismatch {
        expected: u32::MAX as usize,
        found: set.dim,
    })?;
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let mut write = || -> io::Result<()> {
        out.write_all(EMBEDDING_MAGIC)?;
        out.write_all(&dim.to_le_bytes())?;
        out.write_all(&(set.len() as u64).to_le_bytes())?;
        for (id, v) in set.iter() {
            out.write_all(&id.to_le_bytes())?;
            for c in v.as_slice() {
                out.write_all(&c.to_le_bytes())?;
            }
        }
        out.flush()
    };
    write().map_err(io_err)
}

pub fn load_embedding_set(path: &Path) -> Result<EmbeddingSet, EmbeddingError> {
    let io_err = |source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err)?;
    let model_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_embedding_set(&bytes, model_name)
}

pub fn decode_embedding_set(bytes: &[u8], model_name: String) -> Result<EmbeddingSet, EmbeddingError> {
    const HEADER: usize = 4 + 4 + 8;
    if bytes.len() < 4 {
        return Err(EmbeddingError::TruncatedFile("missing magic".into()));
    }
    if &bytes[..4] != EMBEDDING_MAGIC {
        return Err(EmbeddingError::BadMagic);
    }
    if bytes.len() < HEADER {
        return Err(EmbeddingError::TruncatedFile("incomplete header".into()));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if dim == 0 {
        return Err(EmbeddingError::DimMismatch {
            expected: 1,
            found: 0,
        });
    }
    let record = 8 + 4 * dim as u64;
    let body = (bytes.len() - HEADER) as u64;
    let expected = count.checked_mul(record);
    match expected {
        Some(e) if body < e => {
            return Err(EmbeddingError::TruncatedFile(format!(
                "header announces {count} records of dim {dim} ({e} bytes), body has {body}"
            )))
        }
        None => {
            return Err(EmbeddingError::TruncatedFile(format!(
                "record count {count} overflows"
            )))
        }
        Some(e) if body > e => {
            // Records longer than the header declares; report the implied
            // dimension when the body divides evenly, 0 when it does not.
            let per_record = if count > 0 && body % count == 0 {
                body / count
            } else {
                0
            };
            let found = if per_record > 8 && (per_record - 8) % 4 == 0 {
                ((per_record - 8) / 4) as usize
            } else {
                0
            };
            return Err(EmbeddingError::DimMismatch {
                expected: dim,
                found,
            });
        }
        Some(_) => {}
    }

    let mut set = EmbeddingSet::new(dim, model_name);
    for rec in bytes[HEADER..].chunks_exact(record as usize) {
        let id = u64::from_le_bytes(rec[..8].try_into().unwrap());
        let components = rec[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        set.insert(id, EmbeddingVector::new(components)?)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(c.to_vec()).unwrap()
    }

    fn table(entries: &[(&str, &[f32])]) -> WordVectorTable {
        let dim = entries[0].1.len();
        WordVectorTable::new(dim, entries.iter().map(|(t, c)| (t.to_string(), v(c)))).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&v(&[3.0, 4.0])).unwrap();
        assert!((n.as_slice()[0] - 0.6).abs() < 1e-6);
        assert!((n.as_slice()[1] - 0.8).abs() < 1e-6);
        let unit = v(&[0.0, 1.0, 0.0]);
        assert_eq!(normalize(&unit).unwrap(), unit);
        assert!(matches!(normalize(&v(&[0.0, 0.0])), Err(EmbeddingError::ZeroVector)));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            EmbeddingVector::new(vec![1.0, f32::NAN]),
            Err(EmbeddingError::NonFinite { index: 1 })
        ));
        assert!(matches!(
            EmbeddingVector::new(vec![f32::INFINITY]),
            Err(EmbeddingError::NonFinite { index: 0 })
        ));
        assert!(matches!(EmbeddingVector::new(vec![]), Err(EmbeddingError::Empty)));
    }

    #[test]
    fn average_of_single_token_is_its_direction() {
        let t = table(&[("koer", &[2.0, 0.0, 0.0]), ("kass", &[0.0, 1.0, 0.0])]);
        assert_eq!(embed_average("koer", &t).unwrap(), v(&[1.0, 0.0, 0.0]));
    }

    #[test]
    fn average_of_two_orthogonal_tokens() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let e = embed_average("a b", &t).unwrap();
        let h = std::f32::consts::FRAC_1_SQRT_2;
        assert!((e.as_slice()[0] - h).abs() < 1e-6);
        assert!((e.as_slice()[1] - h).abs() < 1e-6);
    }

    #[test]
    fn average_ignores_oov_and_fails_when_all_oov() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        assert_eq!(
            embed_average("zzz a qqq", &t).unwrap(),
            embed_average("a", &t).unwrap()
        );
        assert!(matches!(
            embed_average("zzz qqq", &t),
            Err(EmbeddingError::AllTokensOutOfVocabulary)
        ));
        assert!(matches!(embed_average("   ", &t), Err(EmbeddingError::EmptyText)));
    }

    #[test]
    fn average_is_order_free() {
        let t = table(&[
            ("a", &[0.3, 0.1, -0.2]),
            ("b", &[0.7, -0.4, 0.05]),
            ("c", &[-0.11, 0.9, 0.33]),
        ]);
        let x = embed_average("a b c a", &t).unwrap();
        let y = embed_average("c a a b", &t).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn hash_embedder_is_deterministic_and_seeded() {
        let a = hash_embedder("koer", 32, 7);
        assert_eq!(a, hash_embedder("koer", 32, 7));
        assert_ne!(a, hash_embedder("koer", 32, 8));
        assert_ne!(a, hash_embedder("kass", 32, 7));
        assert!(a.is_normalized());
        assert_eq!(a.dim(), 32);
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f32> = (0..19).map(|i| i as f32 * 0.25 - 2.0).collect();
        let b: Vec<f32> = (0..19).map(|i| (i as f32).sin()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
        assert!((f64::from(dot(&a, &b)) - naive).abs() < 1e-4);
    }

    #[test]
    fn embedding_file_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("model.emb");
        let mut set = EmbeddingSet::new(4, "model");
        set.insert(7, v(&[1.0, 2.0, 3.0, -0.5])).unwrap();
        set.insert(3, v(&[0.0, f32::MIN_POSITIVE, 1e30, -0.0])).unwrap();
        write_embedding_set(&set, &path).unwrap();
        let back = load_embedding_set(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.dim(), 4);
        assert_eq!(back, set);
        for ((_, a), (_, b)) in set.iter().zip(back.iter()) {
            let bits_a: Vec<u32> = a.as_slice().iter().map(|c| c.to_bits()).collect();
            let bits_b: Vec<u32> = b.as_slice().iter().map(|c| c.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn embedding_file_errors() {
        let mut set = EmbeddingSet::new(4, "m");
        set.insert(1, v(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        set.insert(2, v(&[0.0, 1.0, 0.0, 0.0])).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("m.emb");
        write_embedding_set(&set, &path).unwrap();
        let bytes = fs::read(&path).unwrap();

        let truncated = &bytes[..bytes.len() - 5];
        assert!(matches!(
            decode_embedding_set(truncated, "m".into()),
            Err(EmbeddingError::TruncatedFile(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_embedding_set(&bad, "m".into()),
            Err(EmbeddingError::BadMagic)
        ));
        let mut longer = bytes.clone();
        longer.extend_from_slice(&[0u8; 8]);
        assert!(matches!(
            decode_embedding_set(&longer, "m".into()),
            Err(EmbeddingError::DimMismatch { expected: 4, found: 5 })
        ));
    }

    #[test]
    fn table_loads_text_format() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("w2v.txt");
        fs::write(&path, "2 3\nkoer 1 0 0\nkass 0 0.5 0.5\n").unwrap();
        let t = WordVectorTable::load(&path).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("kass").unwrap().as_slice(), &[0.0, 0.5, 0.5]);

        fs::write(&path, "1 3\nkoer 1 0\n").unwrap();
        assert!(matches!(
            WordVectorTable::load(&path),
            Err(EmbeddingError::MalformedTable { line: 2, .. })
        ));
    }
}
