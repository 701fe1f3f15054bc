use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use sqe_core::MotifKind;

#[derive(Debug, Parser)]
#[command(name = "sqe", version, about = "Structural query expansion over a knowledge-base graph")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load nodes/edges TSV files, report counts and optionally write a snapshot.
    Ingest(IngestArgs),
    /// Build a positional index from a JSON-lines document file.
    Index(IndexArgs),
    /// Link request text to knowledge-base articles.
    Link(LinkArgs),
    /// Expand input articles with a structural motif.
    Expand(ExpandArgs),
    /// Count short cycles through seed nodes and summarize them per length.
    AnalyzeCycles(CyclesArgs),
    /// Build the expanded query for one request or a topics file.
    BuildQuery(BuildQueryArgs),
    /// Run queries against an index and print a TREC run.
    Search(SearchArgs),
    /// End-to-end batch run: link, expand, query, merge.
    Run(RunArgs),
    /// Merge per-query ranked lists from several runs.
    Merge(MergeArgs),
    /// Precision at k for one or more runs.
    Eval(EvalArgs),
    /// Paired t-test between two runs on per-query precision.
    Ttest(TtestArgs),
}

/// Either `--kb` (directory or snapshot) or both `--nodes` and `--edges`.
#[derive(Debug, Args)]
#[command(group(ArgGroup::new("graph").required(true).args(["kb", "nodes"])))]
pub struct KbArgs {
    /// Directory with nodes.tsv and edges.tsv, or a snapshot written by `ingest --out`.
    #[arg(long)]
    pub kb: Option<PathBuf>,
    #[arg(long, requires = "edges", conflicts_with = "kb")]
    pub nodes: Option<PathBuf>,
    #[arg(long, requires = "nodes")]
    pub edges: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One request given inline or a topics file of `<qid>\t<text>` lines.
#[derive(Debug, Args)]
#[command(group(ArgGroup::new("request").args(["text", "topics"])))]
pub struct RequestArgs {
    #[arg(long)]
    pub text: Option<String>,
    /// Request id used with `--text`.
    #[arg(long, default_value = "1")]
    pub qid: String,
    #[arg(long)]
    pub topics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub nodes: PathBuf,
    #[arg(long)]
    pub edges: PathBuf,
    /// Write a binary snapshot here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    #[command(flatten)]
    pub request: RequestArgs,
    /// File of normalized titles never to link.
    #[arg(long)]
    pub stop_titles: Option<PathBuf>,
    #[arg(long, default_value_t = sqe_core::linker::DEFAULT_MAX_NGRAM)]
    pub max_ngram: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    #[arg(long, value_parser = parse_motif)]
    pub motif: MotifKind,
    /// Input article titles; repeat the flag for several.
    #[arg(long = "entities", num_args = 1.., required_unless_present = "text")]
    pub entities: Vec<String>,
    /// Link the inputs from this text instead of naming them.
    #[arg(long, conflicts_with = "entities")]
    pub text: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CyclesArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Seed article titles; every node is a seed when omitted.
    #[arg(long = "entities", num_args = 1..)]
    pub entities: Vec<String>,
    #[arg(long, default_value_t = 2)]
    pub min_len: usize,
    #[arg(long, default_value_t = 5)]
    pub max_len: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BuildQueryArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    #[command(flatten)]
    pub request: RequestArgs,
    #[arg(long, value_parser = parse_motif, default_value = "both")]
    pub motif: MotifKind,
    /// Use these titles as the entities instead of linking.
    #[arg(long = "entities", num_args = 1..)]
    pub entities: Vec<String>,
    /// Wrap the query with pseudo-relevance feedback; needs --index.
    #[arg(long, requires = "index")]
    pub prf: bool,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["queries", "query"])))]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// File of rendered queries, one per line, optionally `<qid>\t`-prefixed.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// A single rendered query.
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long, default_value = "1")]
    pub qid: String,
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    #[arg(long)]
    pub prf: bool,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, default_value = "sqe")]
    pub tag: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("collection").required(true).args(["index", "docs"])))]
pub struct RunArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Index this JSON-lines file in memory instead of loading --index.
    #[arg(long)]
    pub docs: Option<PathBuf>,
    #[arg(long)]
    pub topics: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Turn pseudo-relevance feedback on regardless of the config.
    #[arg(long)]
    pub prf: bool,
    /// Use these titles as the entities of every request instead of linking.
    #[arg(long = "entities", num_args = 1..)]
    pub entities: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Per-request link/expand/query timing report; standard error when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Run files in merge order; repeat the flag.
    #[arg(long = "run", required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    /// Comma-separated quotas for every run but the last.
    #[arg(long, value_delimiter = ',', default_value = "5,30")]
    pub cutoffs: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub total: usize,
    #[arg(long, default_value = "merged")]
    pub tag: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "run", required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    /// Baseline run then improved run.
    #[arg(long = "run", required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = sqe_core::eval::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_motif(s: &str) -> Result<MotifKind, String> {
    s.parse()
}
