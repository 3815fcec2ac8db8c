#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sonahunt"));
    cmd.env_remove("SONAHUNT_PORT").env_remove("SONAHUNT_DATA_DIR").env("RUST_LOG", "warn");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Runs and asserts success, returning stdout.
pub fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(
        o.status.success(),
        "sonahunt {args:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub struct Fixture {
    pub words: PathBuf,
    pub definitions: PathBuf,
    pub synonyms: PathBuf,
}

/// 200 words in 100 synonym pairs plus `noise` unlinked words. Both members
/// of a pair share one gloss, so under the hash embedder each pair
/// definition's nearest other definition is its partner's. With `bilingual`
/// the even-numbered pair words carry English definitions.
pub fn pair_fixture(dir: &Path, noise: u64, bilingual: bool) -> Fixture {
    let mut words = String::new();
    let mut defs = String::new();
    let mut syns = String::new();
    for w in 1..=200u64 {
        let lang = if bilingual && w % 2 == 0 { "en" } else { "et" };
        let _ = writeln!(words, "{w}\tet\tsõna{w}");
        let _ = writeln!(defs, "{}\t{w}\t{lang}\tpair gloss {}", 1000 + w, w.div_ceil(2));
        if w % 2 == 1 {
            let _ = writeln!(syns, "{w}\t{}", w + 1);
        }
    }
    for w in 201..201 + noise {
        let _ = writeln!(words, "{w}\tet\tmüra{w}");
        let _ = writeln!(defs, "{}\t{w}\tet\tnoise gloss {w}", 1000 + w);
    }
    let f = Fixture {
        words: dir.join("words.tsv"),
        definitions: dir.join("definitions.tsv"),
        synonyms: dir.join("synonyms.tsv"),
    };
    fs::write(&f.words, words).unwrap();
    fs::write(&f.definitions, defs).unwrap();
    fs::write(&f.synonyms, syns).unwrap();
    f
}

pub struct Built {
    pub lexicon: PathBuf,
    pub embeddings: PathBuf,
    pub index: PathBuf,
}

/// ingest, embed (hash, dim 64) and index-build into `dir`.
pub fn build_pipeline(dir: &Path, f: &Fixture) -> Built {
    let lexicon = dir.join("lex");
    let embeddings = dir.join("defs.emb");
    let index = dir.join("index.hnsw");
    ok(&[
        "ingest",
        "--words",
        s(&f.words),
        "--definitions",
        s(&f.definitions),
        "--synonyms",
        s(&f.synonyms),
        "--out",
        s(&lexicon),
    ]);
    ok(&["embed", "--lexicon", s(&lexicon), "--hash-dim", "64", "--out", s(&embeddings)]);
    ok(&[
        "index-build",
        "--embeddings",
        s(&embeddings),
        "--lexicon",
        s(&lexicon),
        "--out",
        s(&index),
    ]);
    Built {
        lexicon,
        embeddings,
        index,
    }
}

/// `key=value` lookup in command output.
pub fn field<'a>(out: &'a str, key: &str) -> Option<&'a str> {
    out.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
}

pub fn field_f64(out: &str, key: &str) -> f64 {
    field(out, key)
        .unwrap_or_else(|| panic!("no {key}= in output:\n{out}"))
        .parse()
        .unwrap()
}
