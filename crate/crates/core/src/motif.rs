//! Query graph expansion from triangular and square motifs.
//!
//! Both motifs start from an input article `I` and a candidate article `A`
//! that are doubly linked. The triangular motif additionally requires
//! `categories(A) ⊇ categories(I)` with `categories(I)` non-empty and adds one
//! instance per witnessing category of `I`. The square motif adds one instance
//! per pair `(c_I, c_A)`, `c_I ≠ c_A`, joined by a `CC` edge in either
//! direction. Instances are counted per input node, so an article reached from
//! two inputs accumulates both.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::kb_graph::{is_sorted_subset, GraphError, KbGraph, NodeId, NodeKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MotifKind {
    Triangular,
    Square,
    Both,
}

impl fmt::Display for MotifKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotifKind::Triangular => "triangular",
            MotifKind::Square => "square",
            MotifKind::Both => "both",
        })
    }
}

impl FromStr for MotifKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "triangular" | "triangle" => Ok(MotifKind::Triangular),
            "square" => Ok(MotifKind::Square),
            "both" => Ok(MotifKind::Both),
            other => Err(format!("unknown motif kind {other:?} (expected triangular|square|both)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum MotifError {
    #[error("no input nodes")]
    EmptyInput,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Expansion articles with their motif-instance counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryGraph {
    pub input_nodes: BTreeSet<NodeId>,
    pub expansion: BTreeMap<NodeId, u32>,
    pub motif_kind: MotifKind,
}

impl QueryGraph {
    pub fn len(&self) -> usize {
        self.expansion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expansion.is_empty()
    }

    pub fn weight(&self, id: NodeId) -> u32 {
        self.expansion.get(&id).copied().unwrap_or(0)
    }

    /// `(node, weight)` sorted by weight descending, then normalized title ascending.
    pub fn ranked(&self, g: &KbGraph) -> Vec<(NodeId, u32)> {
        let mut out: Vec<(NodeId, u32, String)> = self
            .expansion
            .iter()
            .map(|(&id, &w)| (id, w, crate::text::normalize_title(g.title(id))))
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.2.cmp(&b.2)).then(a.0.cmp(&b.0)));
        out.into_iter().map(|(id, w, _)| (id, w)).collect()
    }
}

fn check_inputs(g: &KbGraph, inputs: &BTreeSet<NodeId>) -> Result<(), MotifError> {
    if inputs.is_empty() {
        return Err(MotifError::EmptyInput);
    }
    for &id in inputs {
        if g.node(id)?.kind != NodeKind::Article {
            return Err(GraphError::NotAnArticle(id).into());
        }
    }
    Ok(())
}

fn triangular_from(g: &KbGraph, input: NodeId, inputs: &BTreeSet<NodeId>, acc: &mut BTreeMap<NodeId, u32>) {
    let own = g.out_neighbors(input, crate::EdgeKind::AC);
    if own.is_empty() {
        return;
    }
    for cand in g.doubly_linked_neighbors(input) {
        if inputs.contains(&cand) {
            continue;
        }
        let theirs = g.out_neighbors(cand, crate::EdgeKind::AC);
        if is_sorted_subset(own, theirs) {
            *acc.entry(cand).or_insert(0) += own.len() as u32;
        }
    }
}

fn square_from(g: &KbGraph, input: NodeId, inputs: &BTreeSet<NodeId>, acc: &mut BTreeMap<NodeId, u32>) {
    let own = g.out_neighbors(input, crate::EdgeKind::AC);
    if own.is_empty() {
        return;
    }
    for cand in g.doubly_linked_neighbors(input) {
        if inputs.contains(&cand) {
            continue;
        }
        let theirs = g.out_neighbors(cand, crate::EdgeKind::AC);
        let mut pairs = 0u32;
        for &ci in own {
            for &ca in theirs {
                if ci != ca && g.category_linked_unchecked(ci, ca) {
                    pairs += 1;
                }
            }
        }
        if pairs > 0 {
            *acc.entry(cand).or_insert(0) += pairs;
        }
    }
}

pub fn expand_triangular(g: &KbGraph, inputs: &BTreeSet<NodeId>) -> Result<QueryGraph, MotifError> {
    expand(g, inputs, MotifKind::Triangular)
}

pub fn expand_square(g: &KbGraph, inputs: &BTreeSet<NodeId>) -> Result<QueryGraph, MotifError> {
    expand(g, inputs, MotifKind::Square)
}

/// `Both` sums triangular and square weights per article.
pub fn expand(g: &KbGraph, inputs: &BTreeSet<NodeId>, kind: MotifKind) -> Result<QueryGraph, MotifError> {
    check_inputs(g, inputs)?;
    let mut expansion = BTreeMap::new();
    for &input in inputs {
        if matches!(kind, MotifKind::Triangular | MotifKind::Both) {
            triangular_from(g, input, inputs, &mut expansion);
        }
        if matches!(kind, MotifKind::Square | MotifKind::Both) {
            square_from(g, input, inputs, &mut expansion);
        }
    }
    Ok(QueryGraph {
        input_nodes: inputs.clone(),
        expansion,
        motif_kind: kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb_graph::{EdgeKind, KbGraphBuilder};

    struct Fixture {
        b: KbGraphBuilder,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture { b: KbGraphBuilder::new() }
        }
        fn article(&mut self, t: &str) -> NodeId {
            self.b.add(NodeKind::Article, t).unwrap()
        }
        fn category(&mut self, t: &str) -> NodeId {
            self.b.add(NodeKind::Category, t).unwrap()
        }
        fn mutual(&mut self, a: NodeId, c: NodeId) {
            self.b.add_edge(a, c, EdgeKind::AA).unwrap();
            self.b.add_edge(c, a, EdgeKind::AA).unwrap();
        }
        fn member(&mut self, a: NodeId, c: NodeId) {
            self.b.add_edge(a, c, EdgeKind::AC).unwrap();
        }
        fn inside(&mut self, c1: NodeId, c2: NodeId) {
            self.b.add_edge(c1, c2, EdgeKind::CC).unwrap();
        }
    }

    fn set(ids: &[NodeId]) -> BTreeSet<NodeId> {
        ids.iter().copied().collect()
    }

    #[test]
    fn triangular_requires_category_superset() {
        let mut f = Fixture::new();
        let i = f.article("input");
        let sup = f.article("superset");
        let part = f.article("partial");
        let one_way = f.article("one way");
        let (c1, c2, c3) = (f.category("c1"), f.category("c2"), f.category("c3"));
        f.member(i, c1);
        f.member(i, c2);
        for a in [sup, one_way] {
            f.member(a, c1);
            f.member(a, c2);
        }
        f.member(sup, c3);
        f.member(part, c1);
        f.mutual(i, sup);
        f.mutual(i, part);
        f.b.add_edge(i, one_way, EdgeKind::AA).unwrap();
        let g = f.b.build();
        let qg = expand_triangular(&g, &set(&[i])).unwrap();
        assert_eq!(qg.expansion, BTreeMap::from([(sup, 2)]));
    }

    #[test]
    fn uncategorized_input_has_no_triangles() {
        let mut f = Fixture::new();
        let i = f.article("input");
        let a = f.article("a");
        let c = f.category("c");
        f.member(a, c);
        f.mutual(i, a);
        let g = f.b.build();
        assert!(expand_triangular(&g, &set(&[i])).unwrap().is_empty());
    }

    #[test]
    fn square_counts_linked_pairs_either_direction() {
        let mut f = Fixture::new();
        let i = f.article("input");
        let a = f.article("a");
        let lonely = f.article("lonely");
        let (ci, ca, cb, shared) = (f.category("ci"), f.category("ca"), f.category("cb"), f.category("shared"));
        f.member(i, ci);
        f.member(i, shared);
        f.member(a, ca);
        f.member(a, cb);
        f.member(a, shared);
        f.member(lonely, shared);
        f.inside(ci, ca);
        f.inside(cb, ci);
        f.inside(ca, ci);
        f.mutual(i, a);
        f.mutual(i, lonely);
        let g = f.b.build();
        let qg = expand_square(&g, &set(&[i])).unwrap();
        // (ci, ca) and (ci, cb) link; the shared category never pairs with itself.
        assert_eq!(qg.expansion, BTreeMap::from([(a, 2)]));
    }

    #[test]
    fn both_sums_weights_and_skips_inputs() {
        let mut f = Fixture::new();
        let i = f.article("input");
        let j = f.article("other input");
        let x = f.article("x");
        let (c, d) = (f.category("c"), f.category("d"));
        f.member(i, c);
        f.member(j, c);
        f.member(x, c);
        f.member(x, d);
        f.inside(c, d);
        f.mutual(i, x);
        f.mutual(i, j);
        let g = f.b.build();
        let inputs = set(&[i, j]);
        assert_eq!(expand_triangular(&g, &inputs).unwrap().weight(x), 1);
        assert_eq!(expand_square(&g, &inputs).unwrap().weight(x), 1);
        let both = expand(&g, &inputs, MotifKind::Both).unwrap();
        assert_eq!(both.expansion, BTreeMap::from([(x, 2)]));
        assert_eq!(both.motif_kind, MotifKind::Both);
    }

    #[test]
    fn errors() {
        let mut f = Fixture::new();
        let c = f.category("c");
        let g = f.b.build();
        assert!(matches!(expand_triangular(&g, &BTreeSet::new()), Err(MotifError::EmptyInput)));
        assert!(matches!(
            expand_square(&g, &set(&[c])),
            Err(MotifError::Graph(GraphError::NotAnArticle(_)))
        ));
        assert!(matches!(
            expand_square(&g, &set(&[NodeId(7)])),
            Err(MotifError::Graph(GraphError::NoSuchNode(_)))
        ));
    }

    #[test]
    fn motif_kind_parses() {
        assert_eq!("Triangular".parse::<MotifKind>().unwrap(), MotifKind::Triangular);
        assert_eq!("both".parse::<MotifKind>().unwrap(), MotifKind::Both);
        assert!("pentagon".parse::<MotifKind>().is_err());
    }
}
