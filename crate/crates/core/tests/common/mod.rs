//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls the library's fast paths: graphs are inspected through
//! their raw edge list and documents through their token vectors.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqe_core::search::Document;
use sqe_core::synthetic::{candidate_edges, graph_from_mask};
use sqe_core::pipeline::Pipeline;
use sqe_core::search::search;
use sqe_core::text::tokenize;
use sqe_core::{
    evaluate, merge_lists, EdgeKind, Index, InputRequest, KbGraph, KbGraphBuilder, NodeId, NodeKind, PipelineConfig,
    Qrels, QueryNode, RankedList,
};

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load_fixture(name: &str) -> KbGraph {
    KbGraph::open(fixture_dir(name)).expect("fixture loads")
}

// ---------------------------------------------------------------------------
// Graph oracles

/// The graph as plain sets, rebuilt from its edge list.
pub struct RawGraph {
    pub kinds: Vec<NodeKind>,
    pub edges: HashSet<(NodeId, NodeId, EdgeKind)>,
}

impl RawGraph {
    pub fn of(g: &KbGraph) -> Self {
        RawGraph {
            kinds: g.nodes().iter().map(|n| n.kind).collect(),
            edges: g.edges().map(|e| (e.src, e.dst, e.kind)).collect(),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.kinds.len() as u32).map(NodeId)
    }

    pub fn articles(&self) -> Vec<NodeId> {
        self.ids().filter(|&i| self.kinds[i.index()] == NodeKind::Article).collect()
    }

    pub fn cats(&self, a: NodeId) -> BTreeSet<NodeId> {
        self.ids().filter(|&c| self.edges.contains(&(a, c, EdgeKind::AC))).collect()
    }

    pub fn doubly(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains(&(a, b, EdgeKind::AA)) && self.edges.contains(&(b, a, EdgeKind::AA))
    }

    pub fn cc_either(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains(&(a, b, EdgeKind::CC)) || self.edges.contains(&(b, a, EdgeKind::CC))
    }

    pub fn adjacent(&self, a: NodeId, b: NodeId) -> bool {
        EdgeKind::ALL
            .iter()
            .any(|&k| self.edges.contains(&(a, b, k)) || self.edges.contains(&(b, a, k)))
    }
}

/// Witness counts `(I, A, c)` for the triangular motif.
pub fn brute_triangular(raw: &RawGraph, inputs: &BTreeSet<NodeId>) -> BTreeMap<NodeId, u32> {
    let mut out = BTreeMap::new();
    for &i in inputs {
        let ci = raw.cats(i);
        if ci.is_empty() {
            continue;
        }
        for a in raw.articles() {
            if inputs.contains(&a) || !raw.doubly(i, a) {
                continue;
            }
            let ca = raw.cats(a);
            if ci.is_subset(&ca) {
                for _c in &ci {
                    *out.entry(a).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

/// Witness counts `(I, A, c_I, c_A)` for the square motif.
pub fn brute_square(raw: &RawGraph, inputs: &BTreeSet<NodeId>) -> BTreeMap<NodeId, u32> {
    let mut out = BTreeMap::new();
    for &i in inputs {
        for a in raw.articles() {
            if inputs.contains(&a) || !raw.doubly(i, a) {
                continue;
            }
            for &ci in &raw.cats(i) {
                for &ca in &raw.cats(a) {
                    if ci != ca && raw.cc_either(ci, ca) {
                        *out.entry(a).or_insert(0) += 1;
                    }
                }
            }
        }
    }
    out
}

pub fn brute_both(raw: &RawGraph, inputs: &BTreeSet<NodeId>) -> BTreeMap<NodeId, u32> {
    let mut out = brute_triangular(raw, inputs);
    for (a, w) in brute_square(raw, inputs) {
        *out.entry(a).or_insert(0) += w;
    }
    out
}

fn permutations(items: &[NodeId]) -> Vec<Vec<NodeId>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Every cycle through a seed found by trying each node subset in each order.
///
/// Results are `[min, x1, …, x(L-1)]` with `x1 < x(L-1)` for `L ≥ 3`.
pub fn brute_cycles(raw: &RawGraph, seeds: &BTreeSet<NodeId>, min_len: usize, max_len: usize) -> BTreeSet<Vec<NodeId>> {
    let n = raw.kinds.len();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        let subset: Vec<NodeId> = (0..n as u32).filter(|i| mask >> i & 1 == 1).map(NodeId).collect();
        let len = subset.len();
        if len < min_len || len > max_len || !subset.iter().any(|s| seeds.contains(s)) {
            continue;
        }
        if len == 2 {
            let (a, b) = (subset[0], subset[1]);
            let articles = raw.kinds[a.index()] == NodeKind::Article && raw.kinds[b.index()] == NodeKind::Article;
            if articles && raw.doubly(a, b) {
                out.insert(subset);
            }
            continue;
        }
        let (first, rest) = subset.split_first().unwrap();
        for perm in permutations(rest) {
            if perm[0] > perm[len - 2] {
                continue;
            }
            let mut seq = vec![*first];
            seq.extend(perm);
            if (0..len).all(|k| raw.adjacent(seq[k], seq[(k + 1) % len])) {
                out.insert(seq);
            }
        }
    }
    out
}

/// Deterministic graph on `n` nodes from an undirected pair mask: bit `k`
/// turns on pair `k` of the `(i < j)` enumeration; kinds and directions are
/// derived from `salt`.
pub fn graph_from_pairs(n: usize, pair_mask: u32, kinds: &[NodeKind], salt: u32) -> KbGraph {
    let mut b = KbGraphBuilder::new();
    for (i, &k) in kinds.iter().enumerate().take(n) {
        b.add(k, &format!("n{i}")).unwrap();
    }
    let mut bit = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let on = pair_mask >> bit & 1 == 1;
            let flavor = (salt.wrapping_mul(2654435761).wrapping_add(bit * 40503) >> 7) % 3;
            bit += 1;
            if !on {
                continue;
            }
            let (a, c) = (NodeId(i as u32), NodeId(j as u32));
            match (kinds[i], kinds[j]) {
                (NodeKind::Article, NodeKind::Category) => b.add_edge(a, c, EdgeKind::AC).unwrap(),
                (NodeKind::Category, NodeKind::Article) => b.add_edge(c, a, EdgeKind::AC).unwrap(),
                (ki, _) => {
                    let kind = if ki == NodeKind::Article { EdgeKind::AA } else { EdgeKind::CC };
                    match flavor {
                        0 => b.add_edge(a, c, kind).unwrap(),
                        1 => b.add_edge(c, a, kind).unwrap(),
                        _ => {
                            b.add_edge(a, c, kind).unwrap();
                            b.add_edge(c, a, kind).unwrap();
                        }
                    }
                }
            }
        }
    }
    b.build()
}

pub fn kinds_from_mask(n: usize, mask: u32) -> Vec<NodeKind> {
    (0..n)
        .map(|i| if mask >> i & 1 == 1 { NodeKind::Category } else { NodeKind::Article })
        .collect()
}

/// Every graph on `n` nodes: each kind assignment with each subset of its valid directed edges.
pub fn for_each_graph(n: usize, mut f: impl FnMut(KbGraph)) {
    for kmask in 0u32..(1 << n) {
        let kinds = kinds_from_mask(n, kmask);
        let cands = candidate_edges(&kinds);
        assert!(cands.len() < 32, "too many candidate edges for exhaustive enumeration");
        for emask in 0u64..(1u64 << cands.len()) {
            f(graph_from_mask(&kinds, &cands, emask));
        }
    }
}

/// Random graph with `n` nodes where every valid directed edge appears with probability `p`.
pub fn random_mask_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> KbGraph {
    let kinds: Vec<NodeKind> = (0..n)
        .map(|_| if rng.gen_bool(0.65) { NodeKind::Article } else { NodeKind::Category })
        .collect();
    let mut b = KbGraphBuilder::new();
    for (i, &k) in kinds.iter().enumerate() {
        b.add(k, &format!("n{i}")).unwrap();
    }
    for (s, d, k) in candidate_edges(&kinds) {
        // Reciprocate article links often so motifs actually occur.
        let boost = if k == EdgeKind::AA && s > d { 2.0 } else { 1.0 };
        if rng.gen_bool((p * boost).min(1.0)) {
            b.add_edge(s, d, k).unwrap();
        }
    }
    b.build()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Retrieval oracles

/// Number of position tuples `p1 < … < pk` with `tokens[i]` at `p(i)` and gaps in `[1, width]`.
pub fn tuple_window_count(doc: &[String], tokens: &[String], width: usize) -> u64 {
    fn go(doc: &[String], tokens: &[String], width: usize, prev: Option<usize>) -> u64 {
        let Some((head, rest)) = tokens.split_first() else {
            return 1;
        };
        let range: Box<dyn Iterator<Item = usize>> = match prev {
            None => Box::new(0..doc.len()),
            Some(p) => Box::new((p + 1)..(p + 1 + width).min(doc.len())),
        };
        range
            .filter(|&q| &doc[q] == head)
            .map(|q| go(doc, rest, width, Some(q)))
            .sum()
    }
    if tokens.is_empty() {
        return 0;
    }
    go(doc, tokens, width, None)
}

/// Query-likelihood scorer over raw token vectors.
pub struct NaiveScorer<'a> {
    pub docs: &'a [Document],
    pub mu: f64,
    pub floor: f64,
    coll_len: f64,
}

impl<'a> NaiveScorer<'a> {
    pub fn new(docs: &'a [Document], mu: f64, floor: f64) -> Self {
        let coll_len = docs.iter().map(|d| d.tokens.len()).sum::<usize>() as f64;
        NaiveScorer { docs, mu, floor, coll_len }
    }

    fn counts(&self, d: &Document, tokens: &[String], width: usize) -> f64 {
        if tokens.len() == 1 {
            d.tokens.iter().filter(|t| **t == tokens[0]).count() as f64
        } else {
            tuple_window_count(&d.tokens, tokens, width) as f64
        }
    }

    fn belief(&self, doc: usize, tokens: &[String], width: usize) -> f64 {
        let d = &self.docs[doc];
        let tf = self.counts(d, tokens, width);
        let mut cf: f64 = self.docs.iter().map(|o| self.counts(o, tokens, width)).sum();
        if cf == 0.0 {
            cf = self.floor;
        }
        ((tf + self.mu * cf / self.coll_len) / (d.tokens.len() as f64 + self.mu)).ln()
    }

    pub fn score(&self, doc: usize, q: &QueryNode) -> f64 {
        match q {
            QueryNode::Term(t) => self.belief(doc, std::slice::from_ref(t), 1),
            QueryNode::Window { width, tokens } => self.belief(doc, tokens, *width as usize),
            QueryNode::Combine(cs) => {
                if cs.is_empty() {
                    return 0.0;
                }
                cs.iter().map(|c| self.score(doc, c)).sum::<f64>() / cs.len() as f64
            }
            QueryNode::Weight(ws) => {
                let total: f64 = ws.iter().map(|(w, _)| w).sum();
                if total == 0.0 {
                    return 0.0;
                }
                ws.iter().map(|(w, c)| w / total * self.score(doc, c)).sum()
            }
        }
    }

    /// Doc ids sorted by score descending, id ascending.
    pub fn ranking(&self, q: &QueryNode) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> =
            (0..self.docs.len()).map(|i| (self.docs[i].doc_id.clone(), self.score(i, q))).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

pub fn random_docs(n: usize, vocab: usize, len: (usize, usize), rng: &mut ChaCha8Rng) -> Vec<Document> {
    (0..n)
        .map(|i| {
            let l = rng.gen_range(len.0..=len.1);
            let tokens = (0..l).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect();
            Document {
                doc_id: format!("doc{i:03}"),
                tokens,
            }
        })
        .collect()
}

pub fn random_query(vocab: usize, depth: u32, rng: &mut ChaCha8Rng) -> QueryNode {
    let tok = |rng: &mut ChaCha8Rng| format!("w{}", rng.gen_range(0..vocab + 2));
    let pick = if depth == 0 { rng.gen_range(0..2) } else { rng.gen_range(0..4) };
    match pick {
        0 => QueryNode::Term(tok(rng)),
        1 => {
            let k = rng.gen_range(2..=3);
            QueryNode::Window {
                width: rng.gen_range(1..=4),
                tokens: (0..k).map(|_| tok(rng)).collect(),
            }
        }
        2 => QueryNode::Combine((0..rng.gen_range(1..=3)).map(|_| random_query(vocab, depth - 1, rng)).collect()),
        _ => QueryNode::Weight(
            (0..rng.gen_range(1..=3))
                .map(|_| (rng.gen_range(1..=9) as f64 * 0.5, random_query(vocab, depth - 1, rng)))
                .collect(),
        ),
    }
}

// ---------------------------------------------------------------------------
// End-to-end collection

pub const TOPIC_WORDS: [&str; 10] = [
    "volcano", "glacier", "desert", "canyon", "harbor", "lighthouse", "castle", "cathedral", "orchard", "vineyard",
];
pub const FEATURE_WORDS: [&str; 5] = ["basalt", "dune", "quay", "rampart", "harvest"];

/// Twenty-node knowledge base: ten topic articles, five feature articles and
/// five categories. Topics `2d` and `2d+1` share category `d` and are doubly
/// linked to feature article `d`, which is also in category `d`.
pub fn e2e_graph() -> KbGraph {
    let mut b = KbGraphBuilder::new();
    let topics: Vec<NodeId> = TOPIC_WORDS.iter().map(|t| b.add(NodeKind::Article, t).unwrap()).collect();
    let features: Vec<NodeId> = FEATURE_WORDS.iter().map(|t| b.add(NodeKind::Article, t).unwrap()).collect();
    let cats: Vec<NodeId> = (0..5).map(|d| b.add(NodeKind::Category, &format!("Group_{d}")).unwrap()).collect();
    for (i, &t) in topics.iter().enumerate() {
        let d = i / 2;
        b.add_edge(t, features[d], EdgeKind::AA).unwrap();
        b.add_edge(features[d], t, EdgeKind::AA).unwrap();
        b.add_edge(t, cats[d], EdgeKind::AC).unwrap();
    }
    for (d, &f) in features.iter().enumerate() {
        b.add_edge(f, cats[d], EdgeKind::AC).unwrap();
    }
    b.build()
}

/// Two hundred documents, topics and qrels.
///
/// Topic `i` has five relevant documents that mention its word once and its
/// feature word twice, and `2 + i % 4` shorter distractors that mention the
/// topic word once with no feature. Under the topic word alone the shorter
/// distractors rank first. The rest is filler.
#[allow(clippy::type_complexity)]
pub fn e2e_collection() -> (Vec<Document>, Vec<(String, String)>, Vec<(String, String)>) {
    let mut rng = rng(7);
    let mut docs = Vec::new();
    let mut qrels = Vec::new();
    let filler = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> {
        (0..n).map(|_| format!("filler{}", rng.gen_range(0..60))).collect()
    };
    for (i, word) in TOPIC_WORDS.iter().enumerate() {
        let feature = FEATURE_WORDS[i / 2];
        for r in 0..5 {
            let mut tokens = filler(&mut rng, 17);
            tokens.insert(rng.gen_range(0..=tokens.len()), word.to_string());
            for _ in 0..2 {
                tokens.insert(rng.gen_range(0..=tokens.len()), feature.to_string());
            }
            let id = format!("t{i}rel{r}");
            qrels.push((format!("q{i}"), id.clone()));
            docs.push(Document { doc_id: id, tokens });
        }
        for x in 0..(2 + i % 4) {
            let mut tokens = filler(&mut rng, 11);
            tokens.insert(rng.gen_range(0..=tokens.len()), word.to_string());
            docs.push(Document {
                doc_id: format!("t{i}dis{x}"),
                tokens,
            });
        }
    }
    let mut f = 0;
    while docs.len() < 200 {
        docs.push(Document {
            doc_id: format!("fill{f:03}"),
            tokens: filler(&mut rng, 20),
        });
        f += 1;
    }
    let topics = TOPIC_WORDS.iter().enumerate().map(|(i, w)| (format!("q{i}"), w.to_string())).collect();
    (docs, topics, qrels)
}

/// Sorted `(title, weight)` view of an expansion for readable assertions.
pub fn titled(g: &KbGraph, m: &BTreeMap<NodeId, u32>) -> BTreeMap<String, u32> {
    m.iter().map(|(&id, &w)| (g.title(id).to_string(), w)).collect()
}

pub fn counts<T: std::hash::Hash + Eq + Clone>(items: &[T]) -> HashMap<T, usize> {
    let mut out = HashMap::new();
    for i in items {
        *out.entry(i.clone()).or_insert(0) += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// Reusable checks

/// Compares all three motif kinds against the brute-force witnesses.
/// An empty input set is skipped.
pub fn check_motifs(g: &KbGraph, inputs: &BTreeSet<NodeId>) -> Result<(), String> {
    use sqe_core::{expand, MotifKind};
    if inputs.is_empty() {
        return Ok(());
    }
    let raw = RawGraph::of(g);
    let cases = [
        (MotifKind::Triangular, brute_triangular(&raw, inputs)),
        (MotifKind::Square, brute_square(&raw, inputs)),
        (MotifKind::Both, brute_both(&raw, inputs)),
    ];
    for (kind, expected) in cases {
        let got = expand(g, inputs, kind).map_err(|e| e.to_string())?;
        if got.expansion != expected {
            return Err(format!(
                "{kind} on {} nodes, inputs {inputs:?}: got {:?}, expected {expected:?}",
                g.node_count(),
                got.expansion
            ));
        }
    }
    Ok(())
}

/// Runs [`check_motifs`] for every non-empty subset of articles.
pub fn check_motifs_all_inputs(g: &KbGraph) -> Result<usize, String> {
    let articles: Vec<NodeId> = g.articles().collect();
    let mut checked = 0;
    for mask in 1u32..(1 << articles.len()) {
        let inputs: BTreeSet<NodeId> = (0..articles.len()).filter(|i| mask >> i & 1 == 1).map(|i| articles[i]).collect();
        check_motifs(g, &inputs)?;
        checked += 1;
    }
    Ok(checked)
}

pub fn random_inputs(g: &KbGraph, max: usize, rng: &mut ChaCha8Rng) -> BTreeSet<NodeId> {
    use rand::seq::SliceRandom;
    let articles: Vec<NodeId> = g.articles().collect();
    if articles.is_empty() {
        return BTreeSet::new();
    }
    let k = rng.gen_range(1..=max.min(articles.len()));
    articles.choose_multiple(rng, k).copied().collect()
}

/// Compares `enumerate_cycles` with the subset oracle for one seed set.
pub fn check_cycles(g: &KbGraph, seeds: &BTreeSet<NodeId>, min_len: usize, max_len: usize) -> Result<(), String> {
    let raw = RawGraph::of(g);
    let got: BTreeSet<Vec<NodeId>> = sqe_core::enumerate_cycles(g, seeds, min_len, max_len)
        .into_iter()
        .map(|c| c.nodes().to_vec())
        .collect();
    let expected = brute_cycles(&raw, seeds, min_len, max_len);
    if got != expected {
        return Err(format!(
            "{} nodes, seeds {seeds:?}: missing {:?}, extra {:?}",
            g.node_count(),
            expected.difference(&got).collect::<Vec<_>>(),
            got.difference(&expected).collect::<Vec<_>>()
        ));
    }
    Ok(())
}

/// All graphs on `n ≤ 6` nodes by undirected structure, with every kind
/// assignment for `n ≤ 5` and a rotating kind assignment at `n = 6`.
pub fn for_each_cycle_graph(n: usize, mut f: impl FnMut(KbGraph)) {
    let pairs = n * (n.saturating_sub(1)) / 2;
    for pmask in 0u32..(1 << pairs) {
        if n <= 5 {
            for kmask in 0u32..(1 << n) {
                f(graph_from_pairs(n, pmask, &kinds_from_mask(n, kmask), pmask ^ kmask));
            }
        } else {
            let kmask = pmask.wrapping_mul(2654435761) >> 26;
            f(graph_from_pairs(n, pmask, &kinds_from_mask(n, kmask), pmask));
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation references

/// Two-sided Student t tail probabilities `(df, t, p)` frozen from scipy.stats.t.sf.
pub const T_TAIL_REFERENCE: [(f64, f64, f64); 6] = [
    (9.0, 1.0, 0.34343639613791355),
    (9.0, 2.0, 0.07655282377070094),
    (9.0, 2.5, 0.03386182768298571),
    (49.0, 1.0, 0.32222340595067556),
    (49.0, 2.0, 0.05105914825741809),
    (49.0, 2.5, 0.01581578884718009),
];

pub const PAIRED_10_BEFORE: [f64; 10] = [0.2, 0.4, 0.1, 0.0, 0.6, 0.3, 0.2, 0.5, 0.1, 0.4];
pub const PAIRED_10_AFTER: [f64; 10] = [0.4, 0.4, 0.3, 0.2, 0.6, 0.5, 0.1, 0.7, 0.3, 0.6];
/// scipy.stats.ttest_rel(after, before).
pub const PAIRED_10_T: f64 = 3.5454545454545454;
pub const PAIRED_10_P: f64 = 0.0062603343372131985;

pub const PAIRED_50_BEFORE: [f64; 50] = [
    0.625, 0.897, 0.776, 0.225, 0.3, 0.874, 0.005, 0.821, 0.797, 0.468, 0.303, 0.278, 0.255, 0.445, 0.505, 0.553,
    0.996, 0.793, 0.622, 0.989, 0.215, 0.16, 0.613, 0.044, 0.036, 0.515, 0.466, 0.917, 0.629, 0.514, 0.497, 0.248,
    0.012, 0.192, 0.692, 0.201, 0.37, 0.004, 0.83, 0.154, 0.268, 0.88, 0.51, 0.847, 0.64, 0.742, 0.091, 0.541, 0.508,
    0.871,
];
#[allow(clippy::approx_constant)]
pub const PAIRED_50_AFTER: [f64; 50] = [
    1.075, 1.099, 0.586, 0.29, 0.465, 0.886, 0.192, 0.858, 0.98, 0.806, 0.218, 0.369, 0.212, 0.52, 0.318, 0.487,
    1.007, 1.023, 0.901, 0.774, 0.106, 0.339, 0.265, 0.001, 0.067, 0.816, 0.654, 0.902, 0.605, 0.514, 0.852, 0.212,
    0.001, 0.313, 0.718, 0.212, 0.197, 0.052, 0.791, 0.437, 0.449, 0.925, 0.694, 0.829, 0.9, 0.791, 0.258, 0.333,
    0.627, 0.583,
];
pub const PAIRED_50_T: f64 = 2.2900706076103297;
pub const PAIRED_50_P: f64 = 0.02636123308828319;

/// Textbook paired t statistic: mean difference over its standard error.
pub fn reference_paired_t(before: &[f64], after: &[f64]) -> f64 {
    let n = before.len() as f64;
    let d: Vec<f64> = after.iter().zip(before).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n;
    let ss: f64 = d.iter().map(|x| (x - mean).powi(2)).sum();
    mean / (ss / (n - 1.0) / n).sqrt()
}

/// Hand-counted precision for the 10-query fixture in `fixtures/eval`:
/// `(qid, P@5, P@10)`. `q6` has judgments but no run.
pub const EVAL_FIXTURE_EXPECTED: [(&str, f64, f64); 10] = [
    ("q1", 1.0, 1.0),
    ("q10", 0.8, 0.4),
    ("q2", 0.0, 0.0),
    ("q3", 0.6, 0.5),
    ("q4", 0.2, 0.1),
    ("q5", 0.4, 0.2),
    ("q6", 0.0, 0.0),
    ("q7", 0.4, 0.7),
    ("q8", 0.2, 0.2),
    ("q9", 0.2, 0.1),
];
pub const EVAL_FIXTURE_MEANS: (f64, f64) = (0.38, 0.32);

// ---------------------------------------------------------------------------
// Merge and end-to-end checks

pub fn random_list(pool: &[String], rng: &mut ChaCha8Rng) -> RankedList {
    let len = rng.gen_range(0..=pool.len().min(1200));
    use rand::seq::SliceRandom;
    let mut docs: Vec<String> = pool.choose_multiple(rng, len).cloned().collect();
    docs.shuffle(rng);
    let mut list = RankedList::new("q", "t");
    list.entries = docs.into_iter().enumerate().map(|(i, d)| (d, -(i as f64))).collect();
    list
}

/// Checks the merge invariants and returns the merged doc ids.
pub fn check_merge(lists: &[RankedList], cutoffs: &[usize], total: usize) -> Vec<String> {
    let merged = merge_lists(lists, cutoffs, total).unwrap();
    let ids: Vec<String> = merged.doc_ids().map(String::from).collect();
    let unique: HashSet<&String> = ids.iter().collect();
    assert_eq!(unique.len(), ids.len(), "duplicates");

    let first: Vec<String> = lists[0].doc_ids().take(cutoffs[0]).map(String::from).collect();
    assert_eq!(&ids[..first.len().min(ids.len())], &first[..first.len().min(ids.len())]);

    // Replays the segments: each one is the next fresh documents of its list
    // in that list's order, followed by the backfill from earlier tails.
    let union: HashSet<&str> = lists.iter().flat_map(|l| l.doc_ids()).collect();
    assert_eq!(ids.len(), total.min(union.len()));
    let mut pos = 0;
    let mut seen: HashSet<&str> = HashSet::new();
    for (i, list) in lists.iter().enumerate() {
        let quota = cutoffs.get(i).copied().unwrap_or(usize::MAX);
        let fresh: Vec<&str> = list.doc_ids().filter(|d| !seen.contains(d)).take(quota).collect();
        let take = fresh.len().min(total - pos);
        assert_eq!(ids[pos..pos + take].iter().map(String::as_str).collect::<Vec<_>>(), fresh[..take]);
        seen.extend(fresh[..take].iter().copied());
        pos += take;
    }
    for list in &lists[..lists.len() - 1] {
        for d in list.doc_ids() {
            if pos < total && seen.insert(d) {
                assert_eq!(ids[pos], d);
                pos += 1;
            }
        }
    }
    assert_eq!(pos, ids.len());
    for (rank, (_, score)) in merged.entries.iter().enumerate() {
        assert_eq!(*score, (total - rank) as f64);
    }
    ids
}

/// Input-only and full-pipeline P@5 on the crafted collection.
pub fn directional_check() -> (Vec<f64>, Vec<f64>) {
    let g = e2e_graph();
    let (docs, topics, judged) = e2e_collection();
    assert_eq!((g.node_count(), docs.len()), (20, 200));
    let idx = Index::build(docs).unwrap();
    let mut qrels = Qrels::new();
    for (q, d) in &judged {
        qrels.insert(q.clone(), d.clone(), 1);
    }
    let reqs: Vec<InputRequest> = topics.iter().map(|(q, t)| InputRequest::new(q, t)).collect();
    let pipeline = Pipeline::new(&g, &idx, PipelineConfig::default()).unwrap();
    let full: Vec<RankedList> = pipeline.run_batch(&reqs, 2).unwrap().into_iter().map(|o| o.run).collect();
    let baseline: Vec<RankedList> = reqs
        .iter()
        .map(|r| {
            let q = QueryNode::Combine(tokenize(&r.text).into_iter().map(QueryNode::Term).collect());
            let mut l = search(&idx, &q, 1000, &Default::default());
            l.request_id = r.request_id.clone();
            l
        })
        .collect();
    let before = evaluate(&baseline, &qrels, &[5]).unwrap().column(5);
    let after = evaluate(&full, &qrels, &[5]).unwrap().column(5);
    (before, after)
}
