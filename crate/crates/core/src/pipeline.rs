//! End-to-end request processing: link, expand once per motif plan entry,
//! build and run one expanded query per entry, then stitch the ranked lists.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::kb_graph::{GraphError, KbGraph, NodeId};
use crate::linker::{read_stop_titles, EntityLinker, InputRequest, LinkError, DEFAULT_MAX_NGRAM};
use crate::motif::{expand, MotifError, MotifKind};
use crate::query::{build_expanded_query, QueryError, QueryNode};
use crate::search::{default_stopwords, prf_expand, search, Index, PrfParams, RankedList, SearchParams};
use crate::text::tokenize;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0} lists need {1} cutoffs, got {2}")]
    LengthMismatch(usize, usize, usize),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{file}:{line}: {reason}")]
    Format { file: String, line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Motif(#[from] MotifError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanEntry {
    pub label: String,
    pub motif: MotifKind,
}

impl PlanEntry {
    pub fn new(label: &str, motif: MotifKind) -> Self {
        PlanEntry {
            label: label.to_string(),
            motif,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub plan: Vec<PlanEntry>,
    /// Entries taken from every list but the last; the last fills up to `total`.
    pub cutoffs: Vec<usize>,
    pub total: usize,
    pub prf: bool,
    pub prf_params: PrfParams,
    pub search: SearchParams,
    pub stopwords: HashSet<String>,
    pub max_ngram: usize,
    pub stop_titles: HashSet<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            plan: vec![
                PlanEntry::new("eq1", MotifKind::Triangular),
                PlanEntry::new("eq2", MotifKind::Both),
                PlanEntry::new("eq3", MotifKind::Square),
            ],
            cutoffs: vec![5, 30],
            total: 1000,
            prf: false,
            prf_params: PrfParams::default(),
            search: SearchParams::default(),
            stopwords: default_stopwords(),
            max_ngram: DEFAULT_MAX_NGRAM,
            stop_titles: HashSet::new(),
        }
    }
}

impl PipelineConfig {
    /// A single plan entry with no merging.
    pub fn single(label: &str, motif: MotifKind, total: usize) -> Self {
        PipelineConfig {
            plan: vec![PlanEntry::new(label, motif)],
            cutoffs: Vec::new(),
            total,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.plan.is_empty() {
            return bad("motif plan is empty".into());
        }
        if self.plan.len() != self.cutoffs.len() + 1 {
            return bad(format!(
                "{} plan entries need {} cutoffs, got {}",
                self.plan.len(),
                self.plan.len() - 1,
                self.cutoffs.len()
            ));
        }
        if self.cutoffs.contains(&0) {
            return bad("cutoffs must be positive".into());
        }
        if self.total == 0 || self.cutoffs.iter().sum::<usize>() > self.total {
            return bad(format!("cutoffs {:?} exceed total {}", self.cutoffs, self.total));
        }
        let labels: HashSet<&str> = self.plan.iter().map(|p| p.label.as_str()).collect();
        if labels.len() != self.plan.len() {
            return bad("plan labels must be unique".into());
        }
        if self.max_ngram == 0 {
            return bad("max_ngram must be at least 1".into());
        }
        Ok(())
    }

    /// Parses a flat `key = value` file. Relative paths resolve against `base`.
    ///
    /// Keys: `plan` (`label:kind,…`), `cutoffs` (`5,30`), `total`, `prf` (`on|off`),
    /// `mu`, `cf_floor`, `fb_docs`, `fb_terms`, `orig_weight`, `stopwords`,
    /// `stop_titles`, `max_ngram`.
    pub fn parse(text: &str, name: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| PipelineError::Format {
                file: name.to_string(),
                line: i + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected key=value".into()))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("{key}: bad number {v:?}")));
            let int = |v: &str| v.parse::<usize>().map_err(|_| err(format!("{key}: bad integer {v:?}")));
            match key {
                "plan" => {
                    cfg.plan = value
                        .split(',')
                        .map(|item| {
                            let (label, kind) = item
                                .split_once(':')
                                .ok_or_else(|| err(format!("plan entry {item:?} is not label:kind")))?;
                            Ok(PlanEntry::new(label.trim(), kind.trim().parse().map_err(err)?))
                        })
                        .collect::<Result<_, PipelineError>>()?;
                }
                "cutoffs" => {
                    cfg.cutoffs = if value.is_empty() {
                        Vec::new()
                    } else {
                        value.split(',').map(|v| int(v.trim())).collect::<Result<_, _>>()?
                    }
                }
                "total" => cfg.total = int(value)?,
                "prf" => {
                    cfg.prf = match value {
                        "on" | "true" | "1" | "yes" => true,
                        "off" | "false" | "0" | "no" => false,
                        v => return Err(err(format!("prf: expected on/off, got {v:?}"))),
                    }
                }
                "mu" => cfg.search.mu = num(value)?,
                "cf_floor" => cfg.search.cf_floor = num(value)?,
                "fb_docs" => cfg.prf_params.fb_docs = int(value)?,
                "fb_terms" => cfg.prf_params.fb_terms = int(value)?,
                "orig_weight" => cfg.prf_params.orig_weight = num(value)?,
                "max_ngram" => cfg.max_ngram = int(value)?,
                "stopwords" => {
                    cfg.stopwords = std::fs::read_to_string(base.join(value))?
                        .lines()
                        .map(|l| l.trim().to_lowercase())
                        .filter(|l| !l.is_empty())
                        .collect()
                }
                "stop_titles" => cfg.stop_titles = read_stop_titles(base.join(value))?,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string(), base)
    }
}

/// Stitches ranked lists: `cutoffs[i]` new documents from list `i`, then the
/// last list fills up to `total`. Documents already taken are skipped without
/// consuming quota. If the last list runs out before `total`, the unused tails
/// of the earlier lists are appended in list order. Output scores are
/// `total − rank + 1`.
pub fn merge_lists(lists: &[RankedList], cutoffs: &[usize], total: usize) -> Result<RankedList, PipelineError> {
    if lists.len() != cutoffs.len() + 1 {
        return Err(PipelineError::LengthMismatch(lists.len(), lists.len().saturating_sub(1), cutoffs.len()));
    }
    let mut merged = RankedList::new(lists[0].request_id.clone(), "merged");
    let mut taken: HashSet<&str> = HashSet::new();
    let mut docs: Vec<&str> = Vec::new();
    for (i, list) in lists.iter().enumerate() {
        let quota = cutoffs.get(i).copied().unwrap_or(usize::MAX);
        let mut appended = 0;
        for doc in list.doc_ids() {
            if docs.len() >= total || appended == quota {
                break;
            }
            if taken.insert(doc) {
                docs.push(doc);
                appended += 1;
            }
        }
    }
    for list in &lists[..lists.len() - 1] {
        for doc in list.doc_ids() {
            if docs.len() >= total {
                break;
            }
            if taken.insert(doc) {
                docs.push(doc);
            }
        }
    }
    merged.entries = docs
        .into_iter()
        .enumerate()
        .map(|(i, d)| (d.to_string(), (total - i) as f64))
        .collect();
    Ok(merged)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanReport {
    pub label: String,
    pub expansion_size: usize,
    pub expand_ms: f64,
    pub query: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RequestReport {
    pub request_id: String,
    pub entities: Vec<(NodeId, String)>,
    /// True when no entity was linked and the input-only query was used.
    pub fallback: bool,
    pub plans: Vec<PlanReport>,
    pub link_ms: f64,
    pub query_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RequestOutcome {
    pub run: RankedList,
    pub report: RequestReport,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// A loaded graph, index and config with the linker dictionary prebuilt.
pub struct Pipeline<'a> {
    pub graph: &'a KbGraph,
    pub index: &'a Index,
    pub config: PipelineConfig,
    linker: EntityLinker,
}

impl<'a> Pipeline<'a> {
    pub fn new(graph: &'a KbGraph, index: &'a Index, config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let linker = EntityLinker::with_stop_titles(graph, &config.stop_titles);
        Ok(Pipeline {
            graph,
            index,
            config,
            linker,
        })
    }

    fn finish_query(&self, q: QueryNode) -> QueryNode {
        if self.config.prf {
            prf_expand(self.index, &q, &self.config.prf_params, &self.config.stopwords, &self.config.search)
        } else {
            q
        }
    }

    fn input_only(&self, req: &InputRequest, link_ms: f64, entities: Vec<(NodeId, String)>) -> RequestOutcome {
        let started = Instant::now();
        let tokens = tokenize(&req.text);
        let mut run = RankedList::new(req.request_id.clone(), "input");
        let mut query = String::new();
        if !tokens.is_empty() {
            let q = self.finish_query(QueryNode::Combine(tokens.into_iter().map(QueryNode::Term).collect()));
            query = crate::query::render(&q);
            run.entries = search(self.index, &q, self.config.total, &self.config.search).entries;
        }
        RequestOutcome {
            run,
            report: RequestReport {
                request_id: req.request_id.clone(),
                entities,
                fallback: true,
                plans: vec![PlanReport {
                    label: "input".into(),
                    expansion_size: 0,
                    expand_ms: 0.0,
                    query,
                }],
                link_ms,
                query_ms: ms_since(started),
            },
        }
    }

    /// Links entities from the request text, falling back to the input-only query on no match.
    pub fn run_request(&self, req: &InputRequest) -> Result<RequestOutcome, PipelineError> {
        let started = Instant::now();
        let linked = self.linker.link(req, self.config.max_ngram);
        let link_ms = ms_since(started);
        match linked {
            Ok(l) => self.run_with_entities(req, &l.input_nodes, link_ms),
            Err(LinkError::NoEntities(_)) | Err(LinkError::EmptyRequest(_)) => Ok(self.input_only(req, link_ms, Vec::new())),
            Err(e) => Err(e.into()),
        }
    }

    /// Runs the plan with explicitly chosen input nodes.
    pub fn run_with_entities(
        &self,
        req: &InputRequest,
        inputs: &[NodeId],
        link_ms: f64,
    ) -> Result<RequestOutcome, PipelineError> {
        let g = self.graph;
        let entities: Vec<(NodeId, String)> = inputs.iter().map(|&id| (id, g.title(id).to_string())).collect();
        let tokens = tokenize(&req.text);
        if inputs.is_empty() || tokens.is_empty() {
            return Ok(self.input_only(req, link_ms, entities));
        }
        let input_set: BTreeSet<NodeId> = inputs.iter().copied().collect();
        let titles: Vec<String> = entities.iter().map(|(_, t)| t.clone()).collect();

        let mut plans = Vec::new();
        let mut queries = Vec::new();
        for entry in &self.config.plan {
            let t = Instant::now();
            let qg = expand(g, &input_set, entry.motif)?;
            let expand_ms = ms_since(t);
            let built = build_expanded_query(&tokens, &titles, Some(&qg), g).map_err(|e| match e {
                QueryError::EmptyInput => PipelineError::Config("empty input".into()),
            })?;
            let q = self.finish_query(built.root);
            plans.push(PlanReport {
                label: entry.label.clone(),
                expansion_size: qg.len(),
                expand_ms,
                query: crate::query::render(&q),
            });
            queries.push(q);
        }

        let t = Instant::now();
        let lists: Vec<RankedList> = queries
            .iter()
            .zip(&self.config.plan)
            .map(|(q, entry)| {
                let mut r = search(self.index, q, self.config.total, &self.config.search);
                r.request_id = req.request_id.clone();
                r.tag = entry.label.clone();
                r
            })
            .collect();
        let run = if lists.len() == 1 {
            lists.into_iter().next().unwrap()
        } else {
            let mut merged = merge_lists(&lists, &self.config.cutoffs, self.config.total)?;
            merged.tag = "sqe".into();
            merged
        };
        Ok(RequestOutcome {
            run,
            report: RequestReport {
                request_id: req.request_id.clone(),
                entities,
                fallback: false,
                plans,
                link_ms,
                query_ms: ms_since(t),
            },
        })
    }

    /// Processes requests on `jobs` threads; results come back in input order.
    pub fn run_batch(&self, requests: &[InputRequest], jobs: usize) -> Result<Vec<RequestOutcome>, PipelineError> {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        pool.install(|| requests.par_iter().map(|r| self.run_request(r)).collect())
    }
}

/// One-shot form of [`Pipeline::run_request`].
pub fn run_request(
    g: &KbGraph,
    idx: &Index,
    req: &InputRequest,
    cfg: &PipelineConfig,
) -> Result<RequestOutcome, PipelineError> {
    Pipeline::new(g, idx, cfg.clone())?.run_request(req)
}

/// Parses a topics file: `<qid>\t<keyword text>` per line.
pub fn parse_topics(text: &str, name: &str) -> Result<Vec<InputRequest>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (qid, body) = line.split_once('\t').ok_or_else(|| PipelineError::Format {
            file: name.to_string(),
            line: i + 1,
            reason: "expected <qid>\\t<text>".into(),
        })?;
        out.push(InputRequest::new(qid.trim(), body.trim()));
    }
    Ok(out)
}

pub fn read_topics(path: impl AsRef<Path>) -> Result<Vec<InputRequest>, PipelineError> {
    let path = path.as_ref();
    parse_topics(&std::fs::read_to_string(path)?, &path.display().to_string())
}

/// Tab-separated per-request report with the stage timings in milliseconds.
pub fn report_tsv(reports: &[RequestReport]) -> String {
    let mut out = String::from("qid\tfallback\tentities\texpansion_sizes\tlink_ms\texpand_ms\tquery_ms\n");
    for r in reports {
        let entities: Vec<&str> = r.entities.iter().map(|(_, t)| t.as_str()).collect();
        let sizes: Vec<String> = r.plans.iter().map(|p| format!("{}={}", p.label, p.expansion_size)).collect();
        let expand: Vec<String> = r.plans.iter().map(|p| format!("{}={:.3}", p.label, p.expand_ms)).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.3}\t{}\t{:.3}\n",
            r.request_id,
            r.fallback,
            entities.join(";"),
            sizes.join(","),
            r.link_ms,
            expand.join(","),
            r.query_ms
        ));
    }
    out
}
