//! Short cycles through seed nodes and their structural statistics.
//!
//! A cycle of length `L ≥ 3` is a sequence of distinct nodes where every
//! consecutive pair (wrapping around) is joined by at least one edge of any
//! kind in either direction. A cycle of length 2 needs two distinct edges
//! between its pair; after deduplication the only way to get that from the
//! edge kinds that make sense for a 2-cycle is a mutual `AA` link, so
//! length-2 cycles are exactly doubly linked article pairs.

use std::collections::{BTreeMap, BTreeSet};

use crate::kb_graph::{KbGraph, NodeId, NodeKind};

pub const MIN_CYCLE_LEN: usize = 2;
pub const MAX_CYCLE_LEN: usize = 5;

/// A cycle stored in canonical orientation: rotated so the smallest id comes
/// first, and reflected so the second element is smaller than the last.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cycle {
    nodes: Vec<NodeId>,
}

impl Cycle {
    /// Canonicalizes any rotation or reflection of the node sequence.
    pub fn new(seq: &[NodeId]) -> Self {
        Cycle {
            nodes: canonical_key(seq),
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains(&id)
    }

    /// Consecutive pairs including last → first. A 2-cycle yields its pair twice.
    pub fn consecutive_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        let n = self.nodes.len();
        (0..n).map(move |i| (self.nodes[i], self.nodes[(i + 1) % n]))
    }
}

/// Rotation- and reflection-invariant encoding of a cyclic sequence.
pub fn canonical_key(seq: &[NodeId]) -> Vec<NodeId> {
    let n = seq.len();
    if n == 0 {
        return Vec::new();
    }
    let start = (0..n).min_by_key(|&i| seq[i]).unwrap();
    let forward: Vec<NodeId> = (0..n).map(|k| seq[(start + k) % n]).collect();
    let backward: Vec<NodeId> = (0..n).map(|k| seq[(start + n - k) % n]).collect();
    forward.min(backward)
}

/// All distinct cycles with length in `[min_len, max_len]` that contain at least one seed.
///
/// Lengths are clamped to `2..=5`.
pub fn enumerate_cycles(g: &KbGraph, seeds: &BTreeSet<NodeId>, min_len: usize, max_len: usize) -> BTreeSet<Cycle> {
    let min_len = min_len.max(MIN_CYCLE_LEN);
    let max_len = max_len.min(MAX_CYCLE_LEN);
    let mut found = BTreeSet::new();
    if min_len > max_len {
        return found;
    }
    let mut neighbors: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &seed in seeds {
        if !g.contains(seed) {
            continue;
        }
        if min_len <= 2 && g.kind(seed) == NodeKind::Article {
            for other in g.doubly_linked_neighbors(seed) {
                found.insert(Cycle::new(&[seed, other]));
            }
        }
        if max_len >= 3 {
            let mut path = vec![seed];
            extend_paths(g, &mut neighbors, &mut path, min_len.max(3), max_len, &mut found);
        }
    }
    found
}

fn extend_paths(
    g: &KbGraph,
    cache: &mut BTreeMap<NodeId, Vec<NodeId>>,
    path: &mut Vec<NodeId>,
    min_len: usize,
    max_len: usize,
    found: &mut BTreeSet<Cycle>,
) {
    let last = *path.last().unwrap();
    let next: Vec<NodeId> = cache
        .entry(last)
        .or_insert_with(|| g.undirected_neighbors(last))
        .clone();
    for n in next {
        if n == path[0] {
            if path.len() >= min_len {
                found.insert(Cycle::new(path));
            }
        } else if path.len() < max_len && !path.contains(&n) {
            path.push(n);
            extend_paths(g, cache, path, min_len, max_len, found);
            path.pop();
        }
    }
}

/// Fraction of the cycle's nodes that are categories.
pub fn category_ratio(g: &KbGraph, c: &Cycle) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let cats = c.nodes().iter().filter(|&&id| g.kind(id) == NodeKind::Category).count();
    cats as f64 / c.len() as f64
}

/// Upper bound on edges between two nodes of the given kinds.
fn pair_capacity(a: NodeKind, b: NodeKind) -> usize {
    if a == b {
        2
    } else {
        1
    }
}

/// `(E − L) / E_max`, clamped at zero.
///
/// `E` counts stored edges over the distinct consecutive pairs; `E_max` sums
/// each consecutive position's capacity. Chords are ignored.
pub fn extra_edge_density(g: &KbGraph, c: &Cycle) -> f64 {
    let mut distinct: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    let mut capacity = 0usize;
    for (a, b) in c.consecutive_pairs() {
        capacity += pair_capacity(g.kind(a), g.kind(b));
        distinct.insert((a.min(b), a.max(b)));
    }
    if capacity == 0 {
        return 0.0;
    }
    let edges: usize = distinct.iter().map(|&(a, b)| g.edges_between(a, b)).sum();
    edges.saturating_sub(c.len()) as f64 / capacity as f64
}

/// Per-length aggregate over a cycle set.
#[derive(Clone, Debug, PartialEq)]
pub struct LengthSummary {
    pub length: usize,
    pub count: usize,
    pub mean_category_ratio: f64,
    pub mean_extra_edge_density: f64,
}

pub fn summarize(g: &KbGraph, cycles: &BTreeSet<Cycle>) -> Vec<LengthSummary> {
    let mut acc: BTreeMap<usize, (usize, f64, f64)> = BTreeMap::new();
    for c in cycles {
        let e = acc.entry(c.len()).or_insert((0, 0.0, 0.0));
        e.0 += 1;
        e.1 += category_ratio(g, c);
        e.2 += extra_edge_density(g, c);
    }
    acc.into_iter()
        .map(|(length, (count, ratio, density))| LengthSummary {
            length,
            count,
            mean_category_ratio: ratio / count as f64,
            mean_extra_edge_density: density / count as f64,
        })
        .collect()
}

/// CSV with header `length,count,mean_category_ratio,mean_extra_edge_density`.
pub fn summary_csv(rows: &[LengthSummary]) -> String {
    let mut out = String::from("length,count,mean_category_ratio,mean_extra_edge_density\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            r.length, r.count, r.mean_category_ratio, r.mean_extra_edge_density
        ));
    }
    out
}
