use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use anyhow::{Context, Result};
use sqe_core::cycles::{summarize, summary_csv};
use sqe_core::eval::{report_table, DEFAULT_KS};
use sqe_core::linker::{read_stop_titles, EntityLinker, LinkError};
use sqe_core::pipeline::{read_topics, report_tsv, Pipeline, RequestOutcome};
use sqe_core::query::parse_query_file;
use sqe_core::search::{prf_expand, read_documents, read_trec_run, search};
use sqe_core::text::{normalize_title, tokenize};
use sqe_core::{
    build_expanded_query, enumerate_cycles, evaluate, expand, merge_lists, paired_t_test, parse, render, Index,
    InputRequest, KbGraph, NodeId, PipelineConfig, Qrels, RankedList, SearchParams,
};

use crate::args::*;

/// A problem with how the command was invoked rather than with its data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Primary output plus an optional secondary report.
pub struct Output {
    pub data: String,
    pub report: Option<String>,
}

impl From<String> for Output {
    fn from(data: String) -> Self {
        Output { data, report: None }
    }
}

pub fn run(cmd: &Command) -> Result<Output> {
    Ok(match cmd {
        Command::Ingest(a) => ingest(a)?.into(),
        Command::Index(a) => index(a)?.into(),
        Command::Link(a) => link(a)?.into(),
        Command::Expand(a) => expand_cmd(a)?.into(),
        Command::AnalyzeCycles(a) => cycles(a)?.into(),
        Command::BuildQuery(a) => build_query(a)?.into(),
        Command::Search(a) => search_cmd(a)?.into(),
        Command::Run(a) => run_batch(a)?,
        Command::Merge(a) => merge(a)?.into(),
        Command::Eval(a) => eval(a)?.into(),
        Command::Ttest(a) => ttest(a)?.into(),
    })
}

pub fn out_path(cmd: &Command) -> Option<&Path> {
    let out = match cmd {
        Command::Ingest(_) | Command::Index(_) => return None,
        Command::Link(a) => &a.out,
        Command::Expand(a) => &a.out,
        Command::AnalyzeCycles(a) => &a.out,
        Command::BuildQuery(a) => &a.out,
        Command::Search(a) => &a.out,
        Command::Run(a) => &a.out,
        Command::Merge(a) => &a.out,
        Command::Eval(a) => &a.out,
        Command::Ttest(a) => &a.out,
    };
    out.out.as_deref()
}

fn load_kb(a: &KbArgs) -> Result<KbGraph> {
    match (&a.kb, &a.nodes, &a.edges) {
        (Some(kb), _, _) => KbGraph::open(kb).with_context(|| format!("loading knowledge base {}", kb.display())),
        (None, Some(n), Some(e)) => KbGraph::load(n, e).context("loading knowledge base"),
        _ => Err(usage("give --kb or both --nodes and --edges")),
    }
}

fn requests(r: &RequestArgs) -> Result<Vec<InputRequest>> {
    match (&r.text, &r.topics) {
        (Some(text), _) => Ok(vec![InputRequest::new(r.qid.clone(), text.clone())]),
        (None, Some(path)) => read_topics(path).with_context(|| format!("reading topics {}", path.display())),
        (None, None) => Err(usage("give --text or --topics")),
    }
}

fn resolve_titles(g: &KbGraph, titles: &[String]) -> Result<Vec<NodeId>> {
    let mut out = Vec::new();
    for t in titles {
        let id = g.article(t).with_context(|| format!("no article titled {t:?}"))?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

fn ingest(a: &IngestArgs) -> Result<String> {
    let g = KbGraph::load(&a.nodes, &a.edges).context("loading knowledge base")?;
    if let Some(out) = &a.out {
        g.save_snapshot(out).with_context(|| format!("writing snapshot {}", out.display()))?;
    }
    Ok(g.validate().summary())
}

fn index(a: &IndexArgs) -> Result<String> {
    let docs = read_documents(&a.docs).with_context(|| format!("reading documents {}", a.docs.display()))?;
    let idx = Index::build(docs)?;
    idx.save(&a.out).with_context(|| format!("writing index {}", a.out.display()))?;
    Ok(format!(
        "documents\t{}\nterms\t{}\ntokens\t{}\n",
        idx.doc_count(),
        idx.vocabulary().len(),
        idx.collection_length()
    ))
}

fn link(a: &LinkArgs) -> Result<String> {
    let g = load_kb(&a.kb)?;
    let stop = match &a.stop_titles {
        Some(p) => read_stop_titles(p).with_context(|| format!("reading {}", p.display()))?,
        None => HashSet::new(),
    };
    let linker = EntityLinker::with_stop_titles(&g, &stop);
    let mut out = String::new();
    for req in requests(&a.request)? {
        match linker.link(&req, a.max_ngram) {
            Ok(l) => {
                for id in l.input_nodes {
                    out.push_str(&format!("{}\t{}\t{}\n", req.request_id, id, g.title(id)));
                }
            }
            Err(LinkError::NoEntities(_)) | Err(LinkError::EmptyRequest(_)) => {
                eprintln!("{}: no entities", req.request_id)
            }
            Err(e) => return Err(usage(e.to_string())),
        }
    }
    Ok(out)
}

fn linked_or_named(g: &KbGraph, entities: &[String], text: Option<&str>) -> Result<Vec<NodeId>> {
    match text {
        Some(t) => Ok(sqe_core::link(g, &InputRequest::new("1", t), sqe_core::linker::DEFAULT_MAX_NGRAM)?.input_nodes),
        None => resolve_titles(g, entities),
    }
}

fn expand_cmd(a: &ExpandArgs) -> Result<String> {
    let g = load_kb(&a.kb)?;
    let inputs: BTreeSet<NodeId> = linked_or_named(&g, &a.entities, a.text.as_deref())?.into_iter().collect();
    let qg = expand(&g, &inputs, a.motif)?;
    Ok(qg
        .ranked(&g)
        .into_iter()
        .map(|(id, w)| format!("{}\t{w}\n", normalize_title(g.title(id))))
        .collect())
}

fn cycles(a: &CyclesArgs) -> Result<String> {
    let g = load_kb(&a.kb)?;
    let seeds: BTreeSet<NodeId> = if a.entities.is_empty() {
        g.nodes().iter().map(|n| n.id).collect()
    } else {
        resolve_titles(&g, &a.entities)?.into_iter().collect()
    };
    let found = enumerate_cycles(&g, &seeds, a.min_len, a.max_len);
    Ok(summary_csv(&summarize(&g, &found)))
}

fn build_query(a: &BuildQueryArgs) -> Result<String> {
    let g = load_kb(&a.kb)?;
    let idx = a.index.as_ref().map(Index::load).transpose().context("loading index")?;
    let reqs = requests(&a.request)?;
    let linker = EntityLinker::new(&g);
    let cfg = PipelineConfig::default();
    let mut out = String::new();
    for req in &reqs {
        let entities = if a.entities.is_empty() {
            match linker.link(req, cfg.max_ngram) {
                Ok(l) => l.input_nodes,
                Err(LinkError::NoEntities(_)) => Vec::new(),
                Err(e) => return Err(e.into()),
            }
        } else {
            resolve_titles(&g, &a.entities)?
        };
        let titles: Vec<String> = entities.iter().map(|&id| g.title(id).to_string()).collect();
        let inputs: BTreeSet<NodeId> = entities.iter().copied().collect();
        let qg = if inputs.is_empty() { None } else { Some(expand(&g, &inputs, a.motif)?) };
        let built = build_expanded_query(&tokenize(&req.text), &titles, qg.as_ref(), &g)
            .map_err(|e| anyhow::anyhow!("request {}: {e}", req.request_id))?;
        let mut q = built.root;
        if a.prf {
            let idx = idx.as_ref().ok_or_else(|| usage("--prf requires --index"))?;
            q = prf_expand(idx, &q, &cfg.prf_params, &cfg.stopwords, &cfg.search);
        }
        if a.request.topics.is_some() {
            out.push_str(&format!("{}\t{}\n", req.request_id, render(&q)));
        } else {
            out.push_str(&format!("{}\n", render(&q)));
        }
    }
    Ok(out)
}

fn search_cmd(a: &SearchArgs) -> Result<String> {
    let idx = Index::load(&a.index).with_context(|| format!("loading index {}", a.index.display()))?;
    let queries = match (&a.query, &a.queries) {
        (Some(q), _) => vec![(a.qid.clone(), parse(q).context("parsing --query")?)],
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_query_file(&text).map_err(|(line, e)| anyhow::anyhow!("{}:{line}: {e}", path.display()))?
        }
        (None, None) => return Err(usage("give --query or --queries")),
    };
    let mut params = SearchParams::default();
    if let Some(mu) = a.mu {
        params.mu = mu;
    }
    let cfg = PipelineConfig::default();
    let mut out = String::new();
    for (qid, q) in queries {
        let q = if a.prf { prf_expand(&idx, &q, &cfg.prf_params, &cfg.stopwords, &params) } else { q };
        let mut run = search(&idx, &q, a.k, &params);
        run.request_id = qid;
        run.tag = a.tag.clone();
        out.push_str(&run.to_trec());
    }
    Ok(out)
}

fn run_batch(a: &RunArgs) -> Result<Output> {
    let g = load_kb(&a.kb)?;
    let idx = match (&a.index, &a.docs) {
        (Some(p), _) => Index::load(p).with_context(|| format!("loading index {}", p.display()))?,
        (None, Some(d)) => Index::build(read_documents(d).with_context(|| format!("reading {}", d.display()))?)?,
        (None, None) => return Err(usage("give --index or --docs")),
    };
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::read(p).with_context(|| format!("reading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    cfg.prf |= a.prf;
    let reqs = read_topics(&a.topics).with_context(|| format!("reading topics {}", a.topics.display()))?;
    let pipeline = Pipeline::new(&g, &idx, cfg)?;
    if a.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let outcomes: Vec<RequestOutcome> = if a.entities.is_empty() {
        pipeline.run_batch(&reqs, a.jobs)?
    } else {
        let inputs = resolve_titles(&g, &a.entities)?;
        reqs.iter()
            .map(|r| pipeline.run_with_entities(r, &inputs, 0.0))
            .collect::<Result<_, _>>()?
    };
    let data: String = outcomes.iter().map(|o| o.run.to_trec()).collect();
    let reports: Vec<_> = outcomes.into_iter().map(|o| o.report).collect();
    Ok(Output {
        data,
        report: Some(report_tsv(&reports)),
    })
}

/// Lists grouped by request id, in order of first appearance across the runs.
fn by_request(runs: &[Vec<RankedList>]) -> Vec<(String, Vec<RankedList>)> {
    let mut order: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for run in runs {
        for l in run {
            if seen.insert(l.request_id.clone()) {
                order.push(l.request_id.clone());
            }
        }
    }
    let maps: Vec<HashMap<&str, &RankedList>> =
        runs.iter().map(|r| r.iter().map(|l| (l.request_id.as_str(), l)).collect()).collect();
    order
        .into_iter()
        .map(|qid| {
            let lists = maps
                .iter()
                .map(|m| m.get(qid.as_str()).map(|&l| l.clone()).unwrap_or_else(|| RankedList::new(qid.clone(), "")))
                .collect();
            (qid, lists)
        })
        .collect()
}

fn read_runs(paths: &[impl AsRef<Path>]) -> Result<Vec<Vec<RankedList>>> {
    paths
        .iter()
        .map(|p| read_trec_run(p).with_context(|| format!("reading run {}", p.as_ref().display())))
        .collect()
}

fn merge(a: &MergeArgs) -> Result<String> {
    if a.runs.len() != a.cutoffs.len() + 1 {
        return Err(usage(format!("{} runs need {} cutoffs, got {}", a.runs.len(), a.runs.len() - 1, a.cutoffs.len())));
    }
    let runs = read_runs(&a.runs)?;
    let mut out = String::new();
    for (qid, lists) in by_request(&runs) {
        let mut merged = merge_lists(&lists, &a.cutoffs, a.total)?;
        merged.request_id = qid;
        merged.tag = a.tag.clone();
        out.push_str(&merged.to_trec());
    }
    Ok(out)
}

fn ks(k: &[usize]) -> Vec<usize> {
    if k.is_empty() {
        DEFAULT_KS.to_vec()
    } else {
        k.to_vec()
    }
}

fn run_name(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

fn eval(a: &EvalArgs) -> Result<String> {
    let qrels = Qrels::read(&a.qrels).with_context(|| format!("reading qrels {}", a.qrels.display()))?;
    let ks = ks(&a.k);
    let mut rows = Vec::new();
    for (path, run) in a.runs.iter().zip(read_runs(&a.runs)?) {
        let report = evaluate(&run, &qrels, &ks)?;
        for q in &report.unknown_queries {
            eprintln!("{}: query {q} has no judgments", path.display());
        }
        rows.push((run_name(path), report));
    }
    Ok(report_table(&rows))
}

fn ttest(a: &TtestArgs) -> Result<String> {
    if a.runs.len() != 2 {
        return Err(usage("ttest takes exactly two --run files: baseline then candidate"));
    }
    let qrels = Qrels::read(&a.qrels).with_context(|| format!("reading qrels {}", a.qrels.display()))?;
    let ks = ks(&a.k);
    let runs = read_runs(&a.runs)?;
    let before = evaluate(&runs[0], &qrels, &ks)?;
    let after = evaluate(&runs[1], &qrels, &ks)?;
    let mut out = String::from("k\tmean_before\tmean_after\tt\tp\tsignificant\n");
    for &k in &ks {
        let t = paired_t_test(&before.column(k), &after.column(k), a.alpha)?;
        out.push_str(&format!(
            "{k}\t{:.4}\t{:.4}\t{:.6}\t{:.6}\t{}\n",
            before.means[&k], after.means[&k], t.t, t.p, t.significant
        ));
    }
    Ok(out)
}
