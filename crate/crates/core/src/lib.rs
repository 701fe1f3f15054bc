//! Structural query expansion over a knowledge-base graph of articles and categories.
//!
//! The pipeline links keyword requests to articles, grows query graphs from
//! triangular and square motifs around those articles, turns them into weighted
//! structured queries, retrieves with a positional query-likelihood engine,
//! stitches several ranked lists together and evaluates precision.

pub mod cycles;
pub mod eval;
pub mod kb_graph;
pub mod linker;
pub mod motif;
pub mod pipeline;
pub mod query;
pub mod search;
pub mod synthetic;
pub mod text;

pub use cycles::{category_ratio, enumerate_cycles, extra_edge_density, Cycle};
pub use eval::{evaluate, paired_t_test, precision_at_k, EvalReport, Qrels, TTest};
pub use kb_graph::{EdgeKind, GraphError, KbGraph, KbGraphBuilder, KbNode, NodeId, NodeKind, ValidationReport};
pub use linker::{link, EntityLinker, InputRequest, LinkedEntities};
pub use motif::{expand, expand_square, expand_triangular, MotifKind, QueryGraph};
pub use pipeline::{merge_lists, run_request, PipelineConfig};
pub use query::{build_expanded_query, parse, render, ExpandedQuery, QueryNode};
pub use search::{Document, Index, RankedList, SearchParams};
