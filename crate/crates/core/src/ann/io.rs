//! Binary index file, little-endian:
//!
//! ```text
//! "HNSW" u8:version
//! u32:m u32:ef_construction u32:ef_search u64:seed
//! u32:dim u64:count u32:entry_point (u32::MAX if none) u32:max_level
//! count * dim * f32                                   vectors
//! count * (u64:definition_id u64:word_id u8:len [u8]) payloads
//! count * (u8:level, (level+1) * (u32:degree, degree * u32))  adjacency
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{HnswIndex, HnswParams, IndexError, Payload};

pub const INDEX_MAGIC: &[u8; 4] = b"HNSW";
pub const INDEX_FORMAT_VERSION: u8 = 1;

const NO_ENTRY: u32 = u32::MAX;

impl HnswIndex {
    pub fn write_to(&self, out: &mut impl Write) -> Result<(), IndexError> {
        out.write_all(INDEX_MAGIC)?;
        out.write_all(&[INDEX_FORMAT_VERSION])?;
        let p = &self.params;
        for v in [p.m, p.ef_construction, p.ef_search] {
            out.write_all(&to_u32(v, "parameter")?.to_le_bytes())?;
        }
        out.write_all(&p.seed.to_le_bytes())?;
        out.write_all(&to_u32(self.dim, "dim")?.to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        out.write_all(&self.entry_point.unwrap_or(NO_ENTRY).to_le_bytes())?;
        out.write_all(&to_u32(self.max_level, "max_level")?.to_le_bytes())?;

        for c in &self.vectors {
            out.write_all(&c.to_le_bytes())?;
        }
        for pl in &self.payloads {
            out.write_all(&pl.definition_id.to_le_bytes())?;
            out.write_all(&pl.word_id.to_le_bytes())?;
            let lang = pl.language.as_bytes();
            let len = u8::try_from(lang.len())
                .map_err(|_| IndexError::Corrupt(format!("language tag too long: {}", pl.language)))?;
            out.write_all(&[len])?;
            out.write_all(lang)?;
        }
        for layers in &self.links {
            out.write_all(&[(layers.len() - 1) as u8])?;
            for list in layers {
                out.write_all(&(list.len() as u32).to_le_bytes())?;
                for nb in list {
                    out.write_all(&nb.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self, IndexError> {
        let mut r = Reader(input);
        let magic: [u8; 4] = r.array()?;
        if &magic != INDEX_MAGIC {
            return Err(IndexError::VersionMismatch(format!(
                "bad magic {magic:?}, expected {INDEX_MAGIC:?}"
            )));
        }
        let [version] = r.array()?;
        if version != INDEX_FORMAT_VERSION {
            return Err(IndexError::VersionMismatch(format!(
                "format version {version}, this build reads {INDEX_FORMAT_VERSION}"
            )));
        }
        let params = HnswParams {
            m: r.u32()? as usize,
            ef_construction: r.u32()? as usize,
            ef_search: r.u32()? as usize,
            seed: r.u64()?,
        };
        params
            .validate()
            .map_err(|e| IndexError::Corrupt(e.to_string()))?;
        let dim = r.u32()? as usize;
        let count = usize::try_from(r.u64()?)
            .ok()
            .filter(|&c| c < NO_ENTRY as usize)
            .ok_or_else(|| IndexError::Corrupt("point count out of range".into()))?;
        let entry = r.u32()?;
        let max_level = r.u32()? as usize;

        let mut index = HnswIndex::empty(params, dim);
        let floats = count
            .checked_mul(dim)
            .ok_or_else(|| IndexError::Corrupt("vector block size overflows".into()))?;
        index.vectors = (0..floats).map(|_| r.f32()).collect::<Result<_, _>>()?;
        for _ in 0..count {
            let definition_id = r.u64()?;
            let word_id = r.u64()?;
            let [len] = r.array()?;
            let mut lang = vec![0u8; len as usize];
            r.0.read_exact(&mut lang)?;
            let language = String::from_utf8(lang)
                .map_err(|_| IndexError::Corrupt("language tag is not UTF-8".into()))?;
            index.payloads.push(Payload {
                definition_id,
                word_id,
                language,
            });
        }
        for _ in 0..count {
            let [level] = r.array()?;
            let mut layers = Vec::with_capacity(level as usize + 1);
            for l in 0..=level as usize {
                let degree = r.u32()? as usize;
                if degree > params.max_degree(l) {
                    return Err(IndexError::Corrupt(format!("degree {degree} exceeds cap at level {l}")));
                }
                let list = (0..degree).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
                if list.iter().any(|&nb| nb as usize >= count) {
                    return Err(IndexError::Corrupt("edge to missing node".into()));
                }
                layers.push(list);
            }
            index.links.push(layers);
        }
        let mut trailing = [0u8; 1];
        if r.0.read(&mut trailing)? != 0 {
            return Err(IndexError::Corrupt("trailing bytes after adjacency block".into()));
        }

        index.entry_point = match (entry, count) {
            (NO_ENTRY, 0) => None,
            (e, n) if (e as usize) < n => Some(e),
            _ => return Err(IndexError::Corrupt("invalid entry point".into())),
        };
        index.max_level = max_level;
        let mut by_definition = HashMap::with_capacity(count);
        for (node, p) in index.payloads.iter().enumerate() {
            if by_definition.insert(p.definition_id, node as u32).is_some() {
                return Err(IndexError::DuplicateDefinitionId(p.definition_id));
            }
        }
        index.by_definition = by_definition;
        index.keys = index.payloads.iter().map(|p| p.definition_id).collect();
        index.pack_base_layer();
        index.audit().map_err(IndexError::Corrupt)?;
        Ok(index)
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32, IndexError> {
    u32::try_from(v).map_err(|_| IndexError::Corrupt(format!("{what} {v} does not fit in u32")))
}

struct Reader<'a, R: Read>(&'a mut R);

impl<R: Read> Reader<'_, R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N], IndexError> {
        let mut buf = [0u8; N];
        self.0.read_exact(&mut buf)?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        self.array().map(u64::from_le_bytes)
    }

    fn f32(&mut self) -> Result<f32, IndexError> {
        self.array().map(f32::from_le_bytes)
    }
}

pub fn serialize_index(index: &HnswIndex, path: &Path) -> Result<(), IndexError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    index.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<HnswIndex, IndexError> {
    let mut input = BufReader::new(fs::File::open(path)?);
    HnswIndex::read_from(&mut input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::IndexedPoint;
    use crate::embedding::hash_embedder;

    fn index(n: usize) -> HnswIndex {
        let pts: Vec<IndexedPoint> = (0..n)
            .map(|i| IndexedPoint {
                vector: hash_embedder(&i.to_string(), 12, 8),
                payload: Payload {
                    definition_id: i as u64 * 3,
                    word_id: i as u64,
                    language: if i % 2 == 0 { "et" } else { "ru" }.into(),
                },
            })
            .collect();
        HnswIndex::build(
            &pts,
            HnswParams {
                m: 6,
                ef_construction: 24,
                ef_search: 20,
                seed: 5,
            },
        )
        .unwrap()
    }

    fn bytes(idx: &HnswIndex) -> Vec<u8> {
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_preserves_search() {
        let idx = index(100);
        let buf = bytes(&idx);
        let back = HnswIndex::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(bytes(&back), buf);
        for i in 0..100 {
            let q = hash_embedder(&format!("query {i}"), 12, 99);
            assert_eq!(
                idx.search(&q, 10, 20, None).unwrap(),
                back.search(&q, 10, 20, None).unwrap()
            );
        }
    }

    #[test]
    fn empty_round_trip() {
        let idx = index(0);
        let back = HnswIndex::read_from(&mut bytes(&idx).as_slice()).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn build_is_byte_deterministic() {
        assert_eq!(bytes(&index(150)), bytes(&index(150)));
    }

    #[test]
    fn header_errors() {
        let mut buf = bytes(&index(10));
        buf[1] = b'X';
        assert!(matches!(
            HnswIndex::read_from(&mut buf.as_slice()),
            Err(IndexError::VersionMismatch(_))
        ));
        let mut buf = bytes(&index(10));
        buf[4] = 2;
        assert!(matches!(
            HnswIndex::read_from(&mut buf.as_slice()),
            Err(IndexError::VersionMismatch(_))
        ));
        let buf = bytes(&index(10));
        assert!(matches!(
            HnswIndex::read_from(&mut &buf[..buf.len() - 3]),
            Err(IndexError::IoFailure(_))
        ));
        let mut longer = buf.clone();
        longer.push(0);
        assert!(matches!(
            HnswIndex::read_from(&mut longer.as_slice()),
            Err(IndexError::Corrupt(_))
        ));
    }

    #[test]
    fn file_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("i.hnsw");
        let idx = index(40);
        serialize_index(&idx, &path).unwrap();
        let back = load_index(&path).unwrap();
        assert_eq!(back.len(), 40);
        assert_eq!(bytes(&back), bytes(&idx));
        assert!(matches!(
            load_index(&tmp.path().join("missing")),
            Err(IndexError::IoFailure(_))
        ));
    }
}
