use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::info;
use sonahunt_core::ann::{load_index, serialize_index};
use sonahunt_core::embedding::{
    hash_embedder, load_embedding_set, write_embedding_set, AveragingEmbedder, HashEmbedder,
};
use sonahunt_core::eval::{
    run_labeled_eval, run_unlabeled_eval, LabeledDataset, QueryLanguageFilter, UnlabeledEvalConfig,
};
use sonahunt_core::ground_truth::build_ground_truth;
use sonahunt_core::lexicon::{lexicon_stats, load_lexicon};
use sonahunt_core::{
    EmbeddingSet, HnswIndex, HnswParams, IndexedPoint, Lexicon, Payload, QueryEmbedder,
    WordVectorTable,
};
use sonahunt_service::{handle_search, AppHandle, SearchRequest, ServiceState};

use crate::args::{
    EmbedArgs, EmbedderSource, EvalCommon, EvalLabeledArgs, EvalUnlabeledArgs, IndexBuildArgs, IngestArgs,
    SearchArgs, ServeArgs, StatsArgs,
};
use crate::{CmdResult, Failure};

/// File names `serve --data-dir` looks for.
pub const DATA_INDEX_FILE: &str = "index.hnsw";
pub const DATA_WORD_VECTORS_FILE: &str = "word_vectors.txt";

fn open_lexicon(dir: &Path) -> Result<Lexicon, Failure> {
    Lexicon::open(dir)
        .with_context(|| format!("opening lexicon store in {}", dir.display()))
        .map_err(Failure::data)
}

fn open_index(path: &Path) -> Result<HnswIndex, Failure> {
    load_index(path)
        .with_context(|| format!("loading index {}", path.display()))
        .map_err(Failure::data)
}

fn query_embedder(source: &EmbedderSource, seed: u64) -> Result<Box<dyn QueryEmbedder>, Failure> {
    match (&source.word_vectors, source.hash_dim) {
        (Some(path), _) => {
            let table = WordVectorTable::load(path)
                .with_context(|| format!("loading word vectors {}", path.display()))
                .map_err(Failure::data)?;
            Ok(Box::new(AveragingEmbedder::new(table)))
        }
        (None, Some(dim)) => hash(dim, seed),
        (None, None) => Err(Failure::usage(anyhow!("one of --word-vectors or --hash-dim is required"))),
    }
}

fn hash(dim: usize, seed: u64) -> Result<Box<dyn QueryEmbedder>, Failure> {
    if dim < 2 {
        return Err(Failure::usage(anyhow!("--hash-dim must be at least 2, got {dim}")));
    }
    Ok(Box::new(HashEmbedder { dim, seed }))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::data)
}

/// `<report>.json`, next to the text report.
pub fn json_path(report: &Path) -> PathBuf {
    let mut s = report.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn ingest(a: IngestArgs) -> CmdResult {
    let lexicon = load_lexicon(&a.words, &a.definitions, &a.synonyms).map_err(Failure::data)?;
    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .map_err(Failure::data)?;
    let store = lexicon.save(&a.out).map_err(Failure::data)?;
    let w = lexicon.warnings();
    println!("store={}", store.display());
    println!("{}", lexicon_stats(&lexicon));
    println!("skipped_self_synonyms={}", w.self_synonyms);
    println!("skipped_duplicate_synonyms={}", w.duplicate_synonyms);
    println!("skipped_non_word_relations={}", w.non_word_relations);
    Ok(())
}

pub fn embed(a: EmbedArgs) -> CmdResult {
    let lexicon = open_lexicon(&a.lexicon)?;
    let embedder = query_embedder(&a.source, a.seed)?;
    let dim = embedder.dim();
    let model = a
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut set = EmbeddingSet::new(dim, model);
    let mut fallback = Vec::new();
    for d in lexicon.definitions() {
        let v = match embedder.embed(&d.text) {
            Ok(v) => v,
            Err(e) => {
                info!("definition {}: {e}; using fallback vector", d.definition_id);
                fallback.push(d.definition_id);
                hash_embedder(&format!("#oov:{}", d.definition_id), dim, 0)
            }
        };
        set.insert(d.definition_id, v).map_err(Failure::data)?;
    }
    write_embedding_set(&set, &a.out).map_err(Failure::data)?;

    let sidecar = oov_list_path(&a.out);
    let mut listing = String::new();
    for id in &fallback {
        let _ = writeln!(listing, "{id}");
    }
    write_file(&sidecar, &listing)?;

    match &a.source.word_vectors {
        Some(_) => println!("mode=word-vectors"),
        None => {
            println!("mode=hash");
            println!("seed={}", a.seed);
        }
    }
    println!("dim={dim}");
    println!("definitions={}", set.len());
    println!("fallback={}", fallback.len());
    println!("fallback_list={}", sidecar.display());
    Ok(())
}

/// `<out>.oov.txt`: ids of definitions that received a fallback vector.
fn oov_list_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".oov.txt");
    PathBuf::from(s)
}

pub fn index_build(a: IndexBuildArgs) -> CmdResult {
    let params = HnswParams {
        m: a.m,
        ef_construction: a.ef_construction,
        ef_search: a.ef_search,
        seed: a.seed,
    };
    params.validate().map_err(Failure::usage)?;
    let lexicon = open_lexicon(&a.lexicon)?;
    let embeddings = load_embedding_set(&a.embeddings).map_err(Failure::data)?;

    let mut points = Vec::with_capacity(lexicon.definition_count());
    for d in lexicon.definitions() {
        let v = embeddings
            .get(d.definition_id)
            .ok_or_else(|| Failure::data(anyhow!("no embedding for definition {}", d.definition_id)))?;
        points.push(IndexedPoint {
            vector: v.clone(),
            payload: Payload {
                definition_id: d.definition_id,
                word_id: d.word_id,
                language: d.language.clone(),
            },
        });
    }
    if embeddings.len() > points.len() {
        log::warn!(
            "{} embeddings have no definition in the lexicon and are ignored",
            embeddings.len() - points.len()
        );
    }

    let index = HnswIndex::build(&points, params).map_err(Failure::data)?;
    serialize_index(&index, &a.out).map_err(Failure::data)?;
    println!("m={}", params.m);
    println!("ef_construction={}", params.ef_construction);
    println!("ef_search={}", params.ef_search);
    println!("seed={}", params.seed);
    println!("points={}", index.len());
    println!("dim={}", index.dim());
    println!("max_level={}", index.max_level());
    Ok(())
}

fn read_vector_file(path: &Path) -> Result<Vec<f32>, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::data)?;
    text.split_whitespace()
        .map(|t| t.parse::<f32>().with_context(|| format!("bad float {t:?} in {}", path.display())))
        .collect::<anyhow::Result<_>>()
        .map_err(Failure::data)
}

pub fn search(a: SearchArgs) -> CmdResult {
    let embedder = match (&a.query, &a.word_vectors, a.hash_dim) {
        (Some(_), Some(path), _) => Some(query_embedder(
            &EmbedderSource {
                word_vectors: Some(path.clone()),
                hash_dim: None,
            },
            a.seed,
        )?),
        (Some(_), None, Some(dim)) => Some(hash(dim, a.seed)?),
        (Some(_), None, None) => {
            return Err(Failure::usage(anyhow!(
                "--query needs --word-vectors or --hash-dim"
            )))
        }
        (None, ..) => None,
    };
    let query_vector = a.vector_file.as_deref().map(read_vector_file).transpose()?;

    let state = ServiceState {
        index: open_index(&a.index)?,
        lexicon: open_lexicon(&a.lexicon)?,
        embedder,
    };
    let req = SearchRequest {
        query: a.query.clone(),
        query_vector,
        language: a.lang.clone(),
        limit: Some(a.limit),
    };
    let response = handle_search(&state, &req).map_err(|e| Failure::data(anyhow!("{e}")))?;
    for h in &response.hits {
        println!(
            "{}\t{}\t{:.4}\t{}",
            h.rank, h.word_surface, h.score, h.matched_definition_text
        );
    }
    Ok(())
}

fn eval_config(c: &EvalCommon, filter: QueryLanguageFilter) -> UnlabeledEvalConfig {
    UnlabeledEvalConfig {
        candidates: c.n,
        fetch_multiplier: c.fetch_multiplier,
        query_language_filter: filter,
        ef_search: c.ef,
        exact: c.exact,
    }
}

/// Config echo at the top of a text report. No paths or timestamps, so
/// repeated runs produce identical files.
fn config_header(protocol: &str, cfg: &UnlabeledEvalConfig, index: &HnswIndex, queries: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "protocol={protocol}");
    let _ = writeln!(s, "candidates={}", cfg.candidates);
    let _ = writeln!(s, "fetch_multiplier={}", cfg.fetch_multiplier);
    if cfg.exact {
        let _ = writeln!(s, "search=exact");
    } else {
        let _ = writeln!(s, "search=hnsw");
        let _ = writeln!(s, "ef={}", cfg.ef_search.unwrap_or(index.params().ef_search));
    }
    let _ = writeln!(s, "query_languages={queries}");
    s
}

pub fn eval_unlabeled(a: EvalUnlabeledArgs) -> CmdResult {
    let filter = if a.queries_non_et {
        QueryLanguageFilter::non_estonian()
    } else {
        QueryLanguageFilter::All
    };
    let cfg = eval_config(&a.common, filter);
    cfg.validate().map_err(Failure::usage)?;
    let index = open_index(&a.common.index)?;
    let lexicon = open_lexicon(&a.common.lexicon)?;
    let embeddings = load_embedding_set(&a.embeddings).map_err(Failure::data)?;
    let gt = build_ground_truth(&lexicon);

    let report = run_unlabeled_eval(&index, &lexicon, &gt, &embeddings, &cfg).map_err(Failure::data)?;
    let queries = if a.queries_non_et { "non-et" } else { "all" };
    let text = config_header("unlabeled", &cfg, &index, queries) + &report.to_text();
    write_file(&a.common.report, &text)?;
    write_file(&json_path(&a.common.report), &report.to_json())?;
    print!("{}", report.to_text());
    Ok(())
}

pub fn eval_labeled(a: EvalLabeledArgs) -> CmdResult {
    let cfg = eval_config(&a.common, QueryLanguageFilter::All);
    cfg.validate().map_err(Failure::usage)?;
    let embedder = query_embedder(&a.source, a.seed)?;
    let index = open_index(&a.common.index)?;
    let lexicon = open_lexicon(&a.common.lexicon)?;
    let dataset = LabeledDataset::load(&a.dataset).map_err(Failure::data)?;
    let gt = build_ground_truth(&lexicon);

    let outcome =
        run_labeled_eval(&index, &lexicon, &gt, &dataset, embedder.as_ref(), &cfg).map_err(Failure::data)?;
    if outcome.reports.is_empty() {
        return Err(Failure::data(anyhow!(
            "no labeled query could be embedded ({} skipped)",
            outcome.skipped
        )));
    }

    let mut text = config_header("labeled", &cfg, &index, "all");
    let _ = writeln!(text, "skipped={}", outcome.skipped);
    let mut json = format!("{{\n  \"skipped\": {},\n  \"reports\": {{", outcome.skipped);
    for (i, (lang, report)) in outcome.reports.iter().enumerate() {
        let _ = write!(text, "\n[{lang}]\n{}", report.to_text());
        let body = report.to_json().replace('\n', "\n    ");
        let sep = if i == 0 { "" } else { "," };
        let key = serde_json::to_string(lang).expect("string serializes");
        let _ = write!(json, "{sep}\n    {key}: {body}");
    }
    json.push_str("\n  }\n}\n");

    write_file(&a.common.report, &text)?;
    write_file(&json_path(&a.common.report), &json)?;
    print!("{text}");
    Ok(())
}

pub fn stats(a: StatsArgs) -> CmdResult {
    let lexicon = open_lexicon(&a.lexicon)?;
    println!("{}", lexicon_stats(&lexicon));
    Ok(())
}

struct ServePaths {
    index: PathBuf,
    lexicon: PathBuf,
    word_vectors: Option<PathBuf>,
}

fn serve_paths(a: &ServeArgs) -> Result<ServePaths, Failure> {
    let from_dir = |name: &str| a.data_dir.as_ref().map(|d| d.join(name));
    let index = a
        .index
        .clone()
        .or_else(|| from_dir(DATA_INDEX_FILE))
        .ok_or_else(|| Failure::usage(anyhow!("--index or --data-dir (SONAHUNT_DATA_DIR) is required")))?;
    let lexicon = a
        .lexicon
        .clone()
        .or_else(|| a.data_dir.clone())
        .ok_or_else(|| Failure::usage(anyhow!("--lexicon or --data-dir (SONAHUNT_DATA_DIR) is required")))?;
    let word_vectors = a
        .word_vectors
        .clone()
        .or_else(|| from_dir(DATA_WORD_VECTORS_FILE).filter(|p| p.is_file()));
    Ok(ServePaths {
        index,
        lexicon,
        word_vectors,
    })
}

fn load_state(paths: &ServePaths) -> Result<ServiceState, Failure> {
    let index = open_index(&paths.index)?;
    let lexicon = open_lexicon(&paths.lexicon)?;
    let embedder: Option<Box<dyn QueryEmbedder>> = match &paths.word_vectors {
        Some(path) => {
            let table = WordVectorTable::load(path)
                .with_context(|| format!("loading word vectors {}", path.display()))
                .map_err(Failure::data)?;
            if table.dim() != index.dim() {
                return Err(Failure::data(anyhow!(
                    "word vectors have dimension {}, index has {}",
                    table.dim(),
                    index.dim()
                )));
            }
            Some(Box::new(AveragingEmbedder::new(table)))
        }
        None => None,
    };
    Ok(ServiceState {
        index,
        lexicon,
        embedder,
    })
}

pub fn serve(a: ServeArgs) -> CmdResult {
    let paths = serve_paths(&a)?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .with_context(|| format!("invalid listen address {}:{}", a.host, a.port))
        .map_err(Failure::usage)?;

    let runtime = tokio::runtime::Runtime::new()
        .context("starting async runtime")
        .map_err(Failure::usage)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))
            .map_err(Failure::usage)?;
        let bound = listener.local_addr().map_err(Failure::usage)?;
        println!("listening on http://{bound}");

        let app = AppHandle::loading();
        let (fail_tx, fail_rx) = tokio::sync::oneshot::channel::<Failure>();
        let loader = app.clone();
        tokio::task::spawn_blocking(move || match load_state(&paths) {
            Ok(state) => {
                info!("index ready: {state:?}");
                loader.set_ready(state);
            }
            Err(f) => {
                let _ = fail_tx.send(f);
            }
        });

        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let watcher = tokio::spawn(async move {
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {
                    let _ = stop_tx.send(());
                    None
                }
                // A successful load drops the sender; that disables this arm.
                Ok(failed) = fail_rx => {
                    let _ = stop_tx.send(());
                    Some(failed)
                }
            }
        });

        sonahunt_service::serve(listener, app, a.cors_origin.as_deref(), async {
            let _ = stop_rx.await;
        })
        .await
        .map_err(Failure::usage)?;

        match watcher.await {
            Ok(Some(f)) => Err(f),
            _ => Ok(()),
        }
    })
}
