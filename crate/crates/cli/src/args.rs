use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sonahunt_core::eval::{DEFAULT_CANDIDATES, DEFAULT_FETCH_MULTIPLIER};

/// Reverse dictionary: find words from their descriptions.
#[derive(Debug, Parser)]
#[command(name = "sonahunt", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load words, definitions and synonyms into a lexicon store.
    Ingest(IngestArgs),
    /// Embed every definition of a lexicon into an embedding file.
    Embed(EmbedArgs),
    /// Build and save an HNSW index over a lexicon's definition embeddings.
    IndexBuild(IndexBuildArgs),
    /// Look up words for a description or a raw vector.
    Search(SearchArgs),
    /// Evaluate with dictionary definitions as queries.
    EvalUnlabeled(EvalUnlabeledArgs),
    /// Evaluate on a labeled description dataset, one report per language.
    EvalLabeled(EvalLabeledArgs),
    /// Print lexicon statistics.
    Stats(StatsArgs),
    /// Run the HTTP search service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub words: PathBuf,
    #[arg(long)]
    pub definitions: PathBuf,
    #[arg(long)]
    pub synonyms: PathBuf,
    /// Output directory for the lexicon store.
    #[arg(long)]
    pub out: PathBuf,
}

/// Query-embedding source: a word-vector table or the hash embedder.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct EmbedderSource {
    /// word2vec-style text table (`<vocab> <dim>` header).
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
    /// Use the deterministic hash embedder with this dimension.
    #[arg(long)]
    pub hash_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Lexicon store directory.
    #[arg(long)]
    pub lexicon: PathBuf,
    #[command(flatten)]
    pub source: EmbedderSource,
    /// Hash embedder seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    #[arg(long, default_value_t = 200)]
    pub ef_construction: usize,
    /// Default beam width stored with the index.
    #[arg(long, default_value_t = 128)]
    pub ef_search: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Free-text description.
    #[arg(long, required_unless_present = "vector_file", conflicts_with = "vector_file")]
    pub query: Option<String>,
    /// File of whitespace-separated floats.
    #[arg(long)]
    pub vector_file: Option<PathBuf>,
    #[arg(long, requires = "query", conflicts_with = "hash_dim")]
    pub word_vectors: Option<PathBuf>,
    #[arg(long, requires = "query")]
    pub hash_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Only match definitions in this language.
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub limit: usize,
}

#[derive(Debug, Args)]
pub struct EvalCommon {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Words kept per query.
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    pub n: usize,
    /// Definition hits fetched per kept word before deduplication.
    #[arg(long, default_value_t = DEFAULT_FETCH_MULTIPLIER)]
    pub fetch_multiplier: usize,
    /// Beam width; the index's stored value when absent.
    #[arg(long)]
    pub ef: Option<usize>,
    /// Exact scan instead of the graph.
    #[arg(long)]
    pub exact: bool,
    /// Text report path; JSON goes to the same path with `.json` appended.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalUnlabeledArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Only non-Estonian definitions act as queries.
    #[arg(long)]
    pub queries_non_et: bool,
}

#[derive(Debug, Args)]
pub struct EvalLabeledArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub source: EmbedderSource,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub lexicon: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory holding `lexicon.store`, `index.hnsw` and optionally
    /// `word_vectors.txt`.
    #[arg(long, env = "SONAHUNT_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
    #[arg(long, env = "SONAHUNT_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Allowed CORS origin; any origin when absent.
    #[arg(long)]
    pub cors_origin: Option<String>,
}
