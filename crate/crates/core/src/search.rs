//! Positional inverted index and query-likelihood retrieval.
//!
//! Every query node evaluates to a log-belief per document with Dirichlet
//! smoothing:
//!
//! ```text
//! term / window   log((tf + μ·cf/|C|) / (|d| + μ))      cf floored at `cf_floor` when zero
//! #combine        mean of child log-beliefs
//! #weight         Σ (w_i / Σw) · child log-belief
//! ```
//!
//! For windows `tf` is the number of ordered matches in the document and
//! `cf` the number of matches in the whole collection.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::query::QueryNode;
use crate::text::tokenize;

pub const DEFAULT_MU: f64 = 2500.0;
pub const DEFAULT_CF_FLOOR: f64 = 0.5;
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("collection is empty")]
    EmptyCollection,
    #[error("no document with ordinal {0}")]
    NoSuchDocument(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{file}:{line}: {reason}")]
    Format { file: String, line: usize, reason: String },
    #[error("index snapshot: {0}")]
    Snapshot(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn from_text(doc_id: impl Into<String>, text: &str) -> Self {
        Document {
            doc_id: doc_id.into(),
            tokens: tokenize(text),
        }
    }
}

#[derive(Deserialize)]
struct JsonDoc {
    id: String,
    text: String,
}

/// Reads a JSON-lines document file with `id` and `text` fields.
pub fn read_documents(path: impl AsRef<Path>) -> Result<Vec<Document>, SearchError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: JsonDoc = serde_json::from_str(&line).map_err(|e| SearchError::Format {
            file: name.clone(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        docs.push(Document::from_text(d.id, &d.text));
    }
    Ok(docs)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub positions: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Index {
    vocab: HashMap<String, u32>,
    terms: Vec<String>,
    postings: Vec<Vec<Posting>>,
    collection_tf: Vec<u64>,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    /// Per document: `(term id, tf)` sorted by term id.
    doc_terms: Vec<Vec<(u32, u32)>>,
    collection_length: u64,
}

const INDEX_MAGIC: &str = "sqe-index/1";

impl Index {
    pub fn build(docs: impl IntoIterator<Item = Document>) -> Result<Self, SearchError> {
        let mut idx = Index {
            vocab: HashMap::new(),
            terms: Vec::new(),
            postings: Vec::new(),
            collection_tf: Vec::new(),
            doc_ids: Vec::new(),
            doc_lengths: Vec::new(),
            doc_terms: Vec::new(),
            collection_length: 0,
        };
        let mut seen = HashSet::new();
        for doc in docs {
            if !seen.insert(doc.doc_id.clone()) {
                return Err(SearchError::DuplicateDocId(doc.doc_id));
            }
            let ord = idx.doc_ids.len() as u32;
            let mut local: HashMap<u32, Vec<u32>> = HashMap::new();
            for (pos, tok) in doc.tokens.iter().enumerate() {
                let next = idx.terms.len() as u32;
                let tid = *idx.vocab.entry(tok.clone()).or_insert(next);
                if tid == next {
                    idx.terms.push(tok.clone());
                    idx.postings.push(Vec::new());
                    idx.collection_tf.push(0);
                }
                local.entry(tid).or_default().push(pos as u32);
            }
            let mut terms: Vec<(u32, u32)> = local.iter().map(|(&t, p)| (t, p.len() as u32)).collect();
            terms.sort_unstable();
            for (tid, positions) in local {
                idx.collection_tf[tid as usize] += positions.len() as u64;
                idx.postings[tid as usize].push(Posting { doc: ord, positions });
            }
            idx.collection_length += doc.tokens.len() as u64;
            idx.doc_lengths.push(doc.tokens.len() as u32);
            idx.doc_terms.push(terms);
            idx.doc_ids.push(doc.doc_id);
        }
        Ok(idx)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SearchError> {
        let mut out = BufWriter::new(File::create(path)?);
        bincode::serialize_into(&mut out, INDEX_MAGIC).map_err(|e| SearchError::Snapshot(e.to_string()))?;
        bincode::serialize_into(&mut out, self).map_err(|e| SearchError::Snapshot(e.to_string()))?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SearchError> {
        let mut input = BufReader::new(File::open(path)?);
        let magic: String = bincode::deserialize_from(&mut input).map_err(|e| SearchError::Snapshot(e.to_string()))?;
        if magic != INDEX_MAGIC {
            return Err(SearchError::Snapshot(format!("bad magic {magic:?}")));
        }
        bincode::deserialize_from(&mut input).map_err(|e| SearchError::Snapshot(e.to_string()))
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_id(&self, ord: usize) -> &str {
        &self.doc_ids[ord]
    }

    pub fn doc_length(&self, ord: usize) -> u32 {
        self.doc_lengths[ord]
    }

    pub fn collection_length(&self) -> u64 {
        self.collection_length
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.terms
    }

    pub fn collection_tf(&self, token: &str) -> u64 {
        self.vocab.get(token).map_or(0, |&t| self.collection_tf[t as usize])
    }

    pub fn postings(&self, token: &str) -> &[Posting] {
        self.vocab.get(token).map_or(&[], |&t| &self.postings[t as usize])
    }

    /// Positions of `token` in document `ord`, ascending.
    pub fn positions(&self, ord: usize, token: &str) -> &[u32] {
        let list = self.postings(token);
        match list.binary_search_by_key(&(ord as u32), |p| p.doc) {
            Ok(i) => &list[i].positions,
            Err(_) => &[],
        }
    }

    pub fn tf(&self, ord: usize, token: &str) -> u64 {
        self.positions(ord, token).len() as u64
    }

    /// `(token, tf)` for every distinct token of document `ord`.
    pub fn doc_terms(&self, ord: usize) -> impl Iterator<Item = (&str, u32)> + '_ {
        self.doc_terms[ord].iter().map(|&(t, tf)| (self.terms[t as usize].as_str(), tf))
    }

    /// Documents containing every token, ascending.
    fn docs_with_all(&self, tokens: &[String]) -> Vec<u32> {
        let mut lists: Vec<&[Posting]> = tokens.iter().map(|t| self.postings(t)).collect();
        lists.sort_by_key(|l| l.len());
        let Some((first, rest)) = lists.split_first() else {
            return Vec::new();
        };
        first
            .iter()
            .map(|p| p.doc)
            .filter(|&d| rest.iter().all(|l| l.binary_search_by_key(&d, |p| p.doc).is_ok()))
            .collect()
    }
}

/// Number of ordered matches `p1 < p2 < … < pk` with `1 ≤ p(i+1) − p(i) ≤ width`, where
/// `p(i)` is drawn from `positions[i]`.
pub fn count_ordered_matches(positions: &[&[u32]], width: u32) -> u64 {
    let Some((first, rest)) = positions.split_first() else {
        return 0;
    };
    let mut prev_pos: Vec<u32> = first.to_vec();
    let mut prev_cnt: Vec<u64> = vec![1; prev_pos.len()];
    for list in rest {
        // Prefix sums over prev_cnt for sliding-window range sums.
        let mut prefix = Vec::with_capacity(prev_cnt.len() + 1);
        prefix.push(0u64);
        for &c in &prev_cnt {
            prefix.push(prefix.last().unwrap() + c);
        }
        let (mut lo, mut hi) = (0usize, 0usize);
        let mut cur_pos = Vec::new();
        let mut cur_cnt = Vec::new();
        for &q in list.iter() {
            // Range of previous positions p with q - width <= p <= q - 1.
            while hi < prev_pos.len() && prev_pos[hi] < q {
                hi += 1;
            }
            while lo < hi && prev_pos[lo] + width < q {
                lo += 1;
            }
            let c = prefix[hi] - prefix[lo];
            if c > 0 {
                cur_pos.push(q);
                cur_cnt.push(c);
            }
        }
        if cur_pos.is_empty() {
            return 0;
        }
        prev_pos = cur_pos;
        prev_cnt = cur_cnt;
    }
    prev_cnt.iter().sum()
}

/// Ordered-window matches of `tokens` in document `ord`.
pub fn window_tf(idx: &Index, ord: usize, width: u32, tokens: &[String]) -> u64 {
    let lists: Vec<&[u32]> = tokens.iter().map(|t| idx.positions(ord, t)).collect();
    count_ordered_matches(&lists, width.max(1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchParams {
    pub mu: f64,
    /// Collection frequency used in place of zero.
    pub cf_floor: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            mu: DEFAULT_MU,
            cf_floor: DEFAULT_CF_FLOOR,
        }
    }
}

fn dirichlet(tf: f64, cf: f64, doc_len: f64, coll_len: f64, p: &SearchParams) -> f64 {
    let cf = if cf == 0.0 { p.cf_floor } else { cf };
    ((tf + p.mu * cf / coll_len) / (doc_len + p.mu)).ln()
}

/// Log-belief of `q` for every document, indexed by ordinal.
pub fn score_all(idx: &Index, q: &QueryNode, params: &SearchParams) -> Result<Vec<f64>, SearchError> {
    if idx.collection_length == 0 {
        return Err(SearchError::EmptyCollection);
    }
    Ok(evaluate(idx, q, params))
}

fn with_counts(idx: &Index, counts: &[(u32, u64)], cf: f64, p: &SearchParams) -> Vec<f64> {
    let coll = idx.collection_length as f64;
    let mut out: Vec<f64> = idx
        .doc_lengths
        .iter()
        .map(|&len| dirichlet(0.0, cf, len as f64, coll, p))
        .collect();
    for &(doc, tf) in counts {
        let d = doc as usize;
        out[d] = dirichlet(tf as f64, cf, idx.doc_lengths[d] as f64, coll, p);
    }
    out
}

fn evaluate(idx: &Index, q: &QueryNode, p: &SearchParams) -> Vec<f64> {
    match q {
        QueryNode::Term(t) => {
            let counts: Vec<(u32, u64)> = idx
                .postings(t)
                .iter()
                .map(|post| (post.doc, post.positions.len() as u64))
                .collect();
            with_counts(idx, &counts, idx.collection_tf(t) as f64, p)
        }
        QueryNode::Window { width, tokens } => {
            let counts: Vec<(u32, u64)> = idx
                .docs_with_all(tokens)
                .into_iter()
                .map(|d| (d, window_tf(idx, d as usize, *width, tokens)))
                .filter(|&(_, tf)| tf > 0)
                .collect();
            let cf: u64 = counts.iter().map(|&(_, tf)| tf).sum();
            with_counts(idx, &counts, cf as f64, p)
        }
        QueryNode::Combine(children) => {
            let mut acc = vec![0.0; idx.doc_count()];
            for c in children {
                for (a, s) in acc.iter_mut().zip(evaluate(idx, c, p)) {
                    *a += s;
                }
            }
            let n = children.len().max(1) as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        }
        QueryNode::Weight(entries) => {
            let total: f64 = entries.iter().map(|(w, _)| w).sum();
            let mut acc = vec![0.0; idx.doc_count()];
            for (w, c) in entries {
                let share = w / total;
                for (a, s) in acc.iter_mut().zip(evaluate(idx, c, p)) {
                    *a += share * s;
                }
            }
            acc
        }
    }
}

/// Log-belief of `q` for document `ord`.
pub fn score_node(idx: &Index, q: &QueryNode, ord: usize, params: &SearchParams) -> Result<f64, SearchError> {
    if ord >= idx.doc_count() {
        return Err(SearchError::NoSuchDocument(ord));
    }
    Ok(score_all(idx, q, params)?[ord])
}

/// A ranked result list for one request.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    pub request_id: String,
    pub entries: Vec<(String, f64)>,
    pub tag: String,
}

impl RankedList {
    pub fn new(request_id: impl Into<String>, tag: impl Into<String>) -> Self {
        RankedList {
            request_id: request_id.into(),
            entries: Vec::new(),
            tag: tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(d, _)| d.as_str())
    }

    /// TREC run lines `qid Q0 docid rank score tag`.
    pub fn write_trec(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (i, (doc, score)) in self.entries.iter().enumerate() {
            writeln!(out, "{} Q0 {} {} {:.6} {}", self.request_id, doc, i + 1, score, self.tag)?;
        }
        Ok(())
    }

    pub fn to_trec(&self) -> String {
        let mut buf = Vec::new();
        self.write_trec(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }
}

/// Orders by score descending, then doc id ascending.
pub fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Scores every document and keeps the top `k`.
pub fn search(idx: &Index, q: &QueryNode, k: usize, params: &SearchParams) -> RankedList {
    let mut list = RankedList::new("", "sqe");
    let Ok(scores) = score_all(idx, q, params) else {
        return list;
    };
    let mut entries: Vec<(String, f64)> = scores
        .into_iter()
        .enumerate()
        .map(|(d, s)| (idx.doc_ids[d].clone(), s))
        .collect();
    entries.sort_by(rank_order);
    entries.truncate(k);
    list.entries = entries;
    list
}

/// Parses a TREC run file into per-query lists, ordered by first appearance of each qid.
pub fn read_trec_run(path: impl AsRef<Path>) -> Result<Vec<RankedList>, SearchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_trec_run(&text, &path.display().to_string())
}

pub fn parse_trec_run(text: &str, name: &str) -> Result<Vec<RankedList>, SearchError> {
    let mut order: Vec<String> = Vec::new();
    // Per request: (rank, doc, score) rows and the run tag.
    type Rows = (Vec<(u64, String, f64)>, String);
    let mut rows: HashMap<String, Rows> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: &str| SearchError::Format {
            file: name.to_string(),
            line: i + 1,
            reason: reason.to_string(),
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(err("expected `qid Q0 docid rank score tag`"));
        }
        let rank: u64 = f[3].parse().map_err(|_| err("bad rank"))?;
        let score: f64 = f[4].parse().map_err(|_| err("bad score"))?;
        let entry = rows.entry(f[0].to_string()).or_insert_with(|| {
            order.push(f[0].to_string());
            (Vec::new(), f[5].to_string())
        });
        entry.0.push((rank, f[2].to_string(), score));
    }
    Ok(order
        .into_iter()
        .map(|qid| {
            let (mut entries, tag) = rows.remove(&qid).unwrap();
            entries.sort_by_key(|e| e.0);
            let mut seen = HashSet::new();
            RankedList {
                request_id: qid,
                entries: entries
                    .into_iter()
                    .filter(|(_, d, _)| seen.insert(d.clone()))
                    .map(|(_, d, s)| (d, s))
                    .collect(),
                tag,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrfParams {
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub orig_weight: f64,
}

impl Default for PrfParams {
    fn default() -> Self {
        PrfParams {
            fb_docs: 10,
            fb_terms: 10,
            orig_weight: 0.5,
        }
    }
}

pub fn default_stopwords() -> HashSet<String> {
    DEFAULT_STOPWORDS.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
}

/// Relevance-model feedback weights over the top `fb_docs` documents of `q`:
/// `w(t) = Σ_d P(t|d) · softmax(score)_d`, with stopwords and the query's own
/// tokens removed. Sorted by weight descending, token ascending.
pub fn feedback_terms(
    idx: &Index,
    q: &QueryNode,
    prf: &PrfParams,
    stopwords: &HashSet<String>,
    params: &SearchParams,
) -> Vec<(String, f64)> {
    let top = search(idx, q, prf.fb_docs, params);
    if top.is_empty() {
        return Vec::new();
    }
    let max = top.entries.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = top.entries.iter().map(|e| (e.1 - max).exp()).collect();
    let z: f64 = raw.iter().sum();
    let ord: HashMap<&str, usize> = idx.doc_ids.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
    let query_tokens: HashSet<&str> = q.tokens().into_iter().collect();
    let mut weights: HashMap<&str, f64> = HashMap::new();
    for ((doc, _), r) in top.entries.iter().zip(&raw) {
        let d = ord[doc.as_str()];
        let len = idx.doc_lengths[d] as f64;
        if len == 0.0 {
            continue;
        }
        for (tok, tf) in idx.doc_terms(d) {
            if stopwords.contains(tok) || query_tokens.contains(tok) {
                continue;
            }
            *weights.entry(tok).or_insert(0.0) += tf as f64 / len * (r / z);
        }
    }
    let mut out: Vec<(String, f64)> = weights.into_iter().map(|(t, w)| (t.to_string(), w)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Wraps `q` as `#weight( orig q  (1-orig) #weight( w(t) t … ) )`.
///
/// Returns `q` unchanged when there is nothing to add.
pub fn prf_expand(
    idx: &Index,
    q: &QueryNode,
    prf: &PrfParams,
    stopwords: &HashSet<String>,
    params: &SearchParams,
) -> QueryNode {
    if prf.fb_terms == 0 || prf.fb_docs == 0 || prf.orig_weight >= 1.0 {
        return q.clone();
    }
    let mut terms = feedback_terms(idx, q, prf, stopwords, params);
    terms.truncate(prf.fb_terms);
    terms.retain(|(_, w)| *w > 0.0);
    if terms.is_empty() {
        return q.clone();
    }
    let feedback = QueryNode::Weight(terms.into_iter().map(|(t, w)| (w, QueryNode::Term(t))).collect());
    if prf.orig_weight <= 0.0 {
        return feedback;
    }
    QueryNode::Weight(vec![(prf.orig_weight, q.clone()), (1.0 - prf.orig_weight, feedback)])
}
