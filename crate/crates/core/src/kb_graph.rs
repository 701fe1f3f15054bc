//! Knowledge-base graph of articles and categories.
//!
//! The graph is a typed directed multigraph with three edge kinds:
//!
//! * `AA`: an article links to another article,
//! * `AC`: an article belongs to a category,
//! * `CC`: a category is inside another category.
//!
//! Adjacency is stored per kind and per direction in compressed sparse rows,
//! sorted ascending and deduplicated, so membership tests are binary searches
//! and neighbor intersections are linear merges. The graph is immutable once
//! built.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_title;

/// Dense index into the node table, assigned in file order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Article,
    Category,
}

impl NodeKind {
    pub fn code(self) -> &'static str {
        match self {
            NodeKind::Article => "A",
            NodeKind::Category => "C",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    /// Article links article.
    AA,
    /// Article belongs to category.
    AC,
    /// Category belongs to category.
    CC,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 3] = [EdgeKind::AA, EdgeKind::AC, EdgeKind::CC];

    pub fn code(self) -> &'static str {
        match self {
            EdgeKind::AA => "AA",
            EdgeKind::AC => "AC",
            EdgeKind::CC => "CC",
        }
    }

    /// Endpoint kinds this edge kind requires.
    pub fn endpoints(self) -> (NodeKind, NodeKind) {
        match self {
            EdgeKind::AA => (NodeKind::Article, NodeKind::Article),
            EdgeKind::AC => (NodeKind::Article, NodeKind::Category),
            EdgeKind::CC => (NodeKind::Category, NodeKind::Category),
        }
    }

    fn parse(code: &str) -> Option<Self> {
        match code {
            "AA" => Some(EdgeKind::AA),
            "AC" => Some(EdgeKind::AC),
            "CC" => Some(EdgeKind::CC),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbNode {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Title as it appears in the nodes file.
    pub title: String,
    /// External id column of the nodes file, kept for round-tripping.
    pub ext_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KbEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
}

/// Errors raised while assembling a graph, independent of any input file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("empty title")]
    EmptyTitle,
    #[error("duplicate {kind:?} title {title:?}")]
    DuplicateTitle { kind: NodeKind, title: String },
    #[error("duplicate external id {0:?}")]
    DuplicateExtId(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("self loop on node {0}")]
    SelfLoop(NodeId),
    #[error("{kind:?} edge cannot join {src:?} to {dst:?}")]
    KindMismatch {
        kind: EdgeKind,
        src: NodeKind,
        dst: NodeKind,
    },
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{file}:{line}: {reason}")]
    Format {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("{file}:{line}: {reason}")]
    KindMismatch {
        file: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("node {0} is not an article")]
    NotAnArticle(NodeId),
    #[error("node {0} is not a category")]
    NotACategory(NodeId),
    #[error("node {0} does not exist")]
    NoSuchNode(NodeId),
    #[error("no article titled {0:?}")]
    UnknownTitle(String),
    #[error("snapshot error: {0}")]
    Snapshot(String),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Compressed sparse rows: `targets[offsets[i]..offsets[i + 1]]` is row `i`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Csr {
    offsets: Vec<u32>,
    targets: Vec<NodeId>,
}

impl Csr {
    /// `pairs` must already be sorted and deduplicated.
    fn from_sorted(n: usize, pairs: impl Iterator<Item = (u32, u32)>) -> Self {
        let mut offsets = vec![0u32; n + 1];
        let mut targets = Vec::new();
        for (src, dst) in pairs {
            offsets[src as usize + 1] += 1;
            targets.push(NodeId(dst));
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Csr { offsets, targets }
    }

    fn build(n: usize, pairs: &mut Vec<(u32, u32)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        Self::from_sorted(n, pairs.iter().copied())
    }

    #[inline]
    fn row(&self, i: NodeId) -> &[NodeId] {
        let lo = self.offsets[i.index()] as usize;
        let hi = self.offsets[i.index() + 1] as usize;
        &self.targets[lo..hi]
    }

    #[inline]
    fn contains(&self, src: NodeId, dst: NodeId) -> bool {
        self.row(src).binary_search(&dst).is_ok()
    }

    fn len(&self) -> usize {
        self.targets.len()
    }
}

const SNAPSHOT_MAGIC: &str = "sqe-kb-snapshot/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbGraph {
    nodes: Vec<KbNode>,
    links_out: Csr,
    links_in: Csr,
    /// AC outgoing: categories of an article.
    categories: Csr,
    /// AC incoming: articles of a category.
    members: Csr,
    /// CC outgoing: categories this category is inside.
    parents: Csr,
    /// CC incoming: categories inside this category.
    children: Csr,
    title_index: HashMap<(NodeKind, String), NodeId>,
}

impl KbGraph {
    /// Loads the nodes and edges TSV files.
    pub fn load(nodes_path: impl AsRef<Path>, edges_path: impl AsRef<Path>) -> Result<Self> {
        let nodes_path = nodes_path.as_ref();
        let edges_path = edges_path.as_ref();
        let mut builder = KbGraphBuilder::new();
        let mut ext_index: HashMap<String, NodeId> = HashMap::new();

        let nodes_name = nodes_path.display().to_string();
        for (i, line) in BufReader::new(File::open(nodes_path)?).lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let format_err = |reason: String| GraphError::Format {
                file: nodes_name.clone(),
                line: lineno,
                reason,
            };
            let mut fields = line.splitn(3, '\t');
            let (Some(ext), Some(kind), Some(title)) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(format_err("expected <ext_id>\\t<A|C>\\t<title>".into()));
            };
            let kind = match kind.trim() {
                "A" => NodeKind::Article,
                "C" => NodeKind::Category,
                other => return Err(format_err(format!("unknown node kind {other:?}"))),
            };
            let ext = ext.trim();
            if ext.is_empty() {
                return Err(format_err("empty external id".into()));
            }
            let id = builder
                .add_node(ext, kind, title)
                .map_err(|e| format_err(e.to_string()))?;
            ext_index.insert(ext.to_string(), id);
        }

        let edges_name = edges_path.display().to_string();
        for (i, line) in BufReader::new(File::open(edges_path)?).lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let format_err = |reason: String| GraphError::Format {
                file: edges_name.clone(),
                line: lineno,
                reason,
            };
            let mut fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 3 {
                fields = line.split_whitespace().collect();
            }
            let [src, dst, kind] = fields[..] else {
                return Err(format_err("expected <src>\\t<dst>\\t<AA|AC|CC>".into()));
            };
            let kind =
                EdgeKind::parse(kind).ok_or_else(|| format_err(format!("unknown edge kind {kind:?}")))?;
            let lookup = |ext: &str| {
                ext_index
                    .get(ext)
                    .copied()
                    .ok_or_else(|| format_err(format!("unknown node id {ext:?}")))
            };
            let (src, dst) = (lookup(src)?, lookup(dst)?);
            match builder.add_edge(src, dst, kind) {
                Ok(()) => {}
                Err(e @ BuildError::KindMismatch { .. }) => {
                    return Err(GraphError::KindMismatch {
                        file: edges_name.clone(),
                        line: lineno,
                        reason: e.to_string(),
                    })
                }
                Err(e) => return Err(format_err(e.to_string())),
            }
        }
        Ok(builder.build())
    }

    /// Opens either a directory holding `nodes.tsv` and `edges.tsv` or a binary snapshot.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.is_dir() {
            Self::load(path.join("nodes.tsv"), path.join("edges.tsv"))
        } else {
            Self::load_snapshot(path)
        }
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        bincode::serialize_into(&mut out, SNAPSHOT_MAGIC).map_err(|e| GraphError::Snapshot(e.to_string()))?;
        bincode::serialize_into(&mut out, self).map_err(|e| GraphError::Snapshot(e.to_string()))
    }

    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let magic: String =
            bincode::deserialize_from(&mut input).map_err(|e| GraphError::Snapshot(e.to_string()))?;
        if magic != SNAPSHOT_MAGIC {
            return Err(GraphError::Snapshot(format!("bad magic {magic:?}")));
        }
        bincode::deserialize_from(&mut input).map_err(|e| GraphError::Snapshot(e.to_string()))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.links_out.len() + self.categories.len() + self.parents.len()
    }

    pub fn edge_count_of(&self, kind: EdgeKind) -> usize {
        match kind {
            EdgeKind::AA => self.links_out.len(),
            EdgeKind::AC => self.categories.len(),
            EdgeKind::CC => self.parents.len(),
        }
    }

    pub fn nodes(&self) -> &[KbNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&KbNode> {
        self.nodes.get(id.index()).ok_or(GraphError::NoSuchNode(id))
    }

    /// Panics on an id outside the node table.
    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.index()].kind
    }

    pub fn title(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].title
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    /// Looks a title up in the normalized title index.
    pub fn lookup(&self, kind: NodeKind, title: &str) -> Option<NodeId> {
        self.title_index.get(&(kind, normalize_title(title))).copied()
    }

    pub fn article(&self, title: &str) -> Result<NodeId> {
        self.lookup(NodeKind::Article, title)
            .ok_or_else(|| GraphError::UnknownTitle(title.to_string()))
    }

    pub fn articles(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Article)
            .map(|n| n.id)
    }

    pub fn categories_iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Category)
            .map(|n| n.id)
    }

    fn ensure_article(&self, id: NodeId) -> Result<()> {
        match self.nodes.get(id.index()) {
            None => Err(GraphError::NoSuchNode(id)),
            Some(n) if n.kind != NodeKind::Article => Err(GraphError::NotAnArticle(id)),
            Some(_) => Ok(()),
        }
    }

    fn ensure_category(&self, id: NodeId) -> Result<()> {
        match self.nodes.get(id.index()) {
            None => Err(GraphError::NoSuchNode(id)),
            Some(n) if n.kind != NodeKind::Category => Err(GraphError::NotACategory(id)),
            Some(_) => Ok(()),
        }
    }

    /// Articles linked from `id` (empty for categories).
    pub fn out_links(&self, id: NodeId) -> &[NodeId] {
        self.links_out.row(id)
    }

    /// Articles linking to `id` (empty for categories).
    pub fn in_links(&self, id: NodeId) -> &[NodeId] {
        self.links_in.row(id)
    }

    /// Outgoing from `id` through edges of `kind`.
    pub fn out_neighbors(&self, id: NodeId, kind: EdgeKind) -> &[NodeId] {
        match kind {
            EdgeKind::AA => self.links_out.row(id),
            EdgeKind::AC => self.categories.row(id),
            EdgeKind::CC => self.parents.row(id),
        }
    }

    /// Incoming to `id` through edges of `kind`.
    pub fn in_neighbors(&self, id: NodeId, kind: EdgeKind) -> &[NodeId] {
        match kind {
            EdgeKind::AA => self.links_in.row(id),
            EdgeKind::AC => self.members.row(id),
            EdgeKind::CC => self.children.row(id),
        }
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId, kind: EdgeKind) -> bool {
        match kind {
            EdgeKind::AA => self.links_out.contains(src, dst),
            EdgeKind::AC => self.categories.contains(src, dst),
            EdgeKind::CC => self.parents.contains(src, dst),
        }
    }

    /// Number of stored edges between `a` and `b`, both directions, all kinds.
    pub fn edges_between(&self, a: NodeId, b: NodeId) -> usize {
        EdgeKind::ALL
            .iter()
            .map(|&k| self.has_edge(a, b, k) as usize + self.has_edge(b, a, k) as usize)
            .sum()
    }

    /// True iff `AA(a, b)` and `AA(b, a)` both exist.
    pub fn doubly_linked(&self, a: NodeId, b: NodeId) -> Result<bool> {
        self.ensure_article(a)?;
        self.ensure_article(b)?;
        Ok(a != b && self.links_out.contains(a, b) && self.links_out.contains(b, a))
    }

    /// Articles that are doubly linked with `a`, ascending.
    pub fn doubly_linked_neighbors(&self, a: NodeId) -> Vec<NodeId> {
        intersect_sorted(self.links_out.row(a), self.links_in.row(a))
    }

    /// Direct categories of article `a`, ascending.
    pub fn categories_of(&self, a: NodeId) -> Result<&[NodeId]> {
        self.ensure_article(a)?;
        Ok(self.categories.row(a))
    }

    /// True iff `CC(c1, c2)` or `CC(c2, c1)` exists.
    pub fn category_linked(&self, c1: NodeId, c2: NodeId) -> Result<bool> {
        self.ensure_category(c1)?;
        self.ensure_category(c2)?;
        Ok(self.category_linked_unchecked(c1, c2))
    }

    #[inline]
    pub(crate) fn category_linked_unchecked(&self, c1: NodeId, c2: NodeId) -> bool {
        self.parents.contains(c1, c2) || self.parents.contains(c2, c1)
    }

    /// Neighbors of `id` in the undirected view over all edge kinds, ascending.
    pub fn undirected_neighbors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = [
            &self.links_out,
            &self.links_in,
            &self.categories,
            &self.members,
            &self.parents,
            &self.children,
        ]
        .iter()
        .flat_map(|csr| csr.row(id).iter().copied())
        .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every stored edge, grouped by kind and sorted by `(src, dst)`.
    pub fn edges(&self) -> impl Iterator<Item = KbEdge> + '_ {
        EdgeKind::ALL.into_iter().flat_map(move |kind| {
            let csr = match kind {
                EdgeKind::AA => &self.links_out,
                EdgeKind::AC => &self.categories,
                EdgeKind::CC => &self.parents,
            };
            (0..self.nodes.len() as u32).flat_map(move |src| {
                csr.row(NodeId(src)).iter().map(move |&dst| KbEdge {
                    src: NodeId(src),
                    dst,
                    kind,
                })
            })
        })
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for node in &self.nodes {
            match node.kind {
                NodeKind::Article => {
                    report.articles += 1;
                    if self.categories.row(node.id).is_empty() {
                        report.uncategorized_articles.push(node.id);
                    }
                }
                NodeKind::Category => {
                    report.categories += 1;
                    if self.members.row(node.id).is_empty()
                        && self.parents.row(node.id).is_empty()
                        && self.children.row(node.id).is_empty()
                    {
                        report.orphan_categories.push(node.id);
                    }
                }
            }
        }
        report.aa_edges = self.links_out.len();
        report.ac_edges = self.categories.len();
        report.cc_edges = self.parents.len();
        report
    }
}

/// Counts by kind plus the structural warnings found by [`KbGraph::validate`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub articles: usize,
    pub categories: usize,
    pub aa_edges: usize,
    pub ac_edges: usize,
    pub cc_edges: usize,
    /// Articles with no `AC` edge.
    pub uncategorized_articles: Vec<NodeId>,
    /// Categories with no members and no `CC` edge in either direction.
    pub orphan_categories: Vec<NodeId>,
}

impl ValidationReport {
    pub fn warning_count(&self) -> usize {
        self.uncategorized_articles.len() + self.orphan_categories.len()
    }

    pub fn summary(&self) -> String {
        format!(
            "articles\t{}\ncategories\t{}\nAA\t{}\nAC\t{}\nCC\t{}\nuncategorized_articles\t{}\norphan_categories\t{}\n",
            self.articles,
            self.categories,
            self.aa_edges,
            self.ac_edges,
            self.cc_edges,
            self.uncategorized_articles.len(),
            self.orphan_categories.len()
        )
    }
}

/// Incremental graph construction. Parallel edges are deduplicated in [`build`](Self::build).
#[derive(Debug, Default)]
pub struct KbGraphBuilder {
    nodes: Vec<KbNode>,
    title_index: HashMap<(NodeKind, String), NodeId>,
    ext_ids: HashMap<String, NodeId>,
    links: Vec<(u32, u32)>,
    memberships: Vec<(u32, u32)>,
    subcategories: Vec<(u32, u32)>,
}

impl KbGraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, ext_id: &str, kind: NodeKind, title: &str) -> Result<NodeId, BuildError> {
        let key = normalize_title(title);
        if key.is_empty() {
            return Err(BuildError::EmptyTitle);
        }
        if self.title_index.contains_key(&(kind, key.clone())) {
            return Err(BuildError::DuplicateTitle {
                kind,
                title: title.to_string(),
            });
        }
        if self.ext_ids.contains_key(ext_id) {
            return Err(BuildError::DuplicateExtId(ext_id.to_string()));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(KbNode {
            id,
            kind,
            title: title.trim().to_string(),
            ext_id: ext_id.to_string(),
        });
        self.title_index.insert((kind, key), id);
        self.ext_ids.insert(ext_id.to_string(), id);
        Ok(id)
    }

    /// Adds a node whose external id is its dense index.
    pub fn add(&mut self, kind: NodeKind, title: &str) -> Result<NodeId, BuildError> {
        let ext = self.nodes.len().to_string();
        self.add_node(&ext, kind, title)
    }

    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, kind: EdgeKind) -> Result<(), BuildError> {
        let node_kind = |id: NodeId| {
            self.nodes
                .get(id.index())
                .map(|n| n.kind)
                .ok_or_else(|| BuildError::UnknownNode(id.to_string()))
        };
        let (src_kind, dst_kind) = (node_kind(src)?, node_kind(dst)?);
        if src == dst {
            return Err(BuildError::SelfLoop(src));
        }
        if kind.endpoints() != (src_kind, dst_kind) {
            return Err(BuildError::KindMismatch {
                kind,
                src: src_kind,
                dst: dst_kind,
            });
        }
        let pair = (src.0, dst.0);
        match kind {
            EdgeKind::AA => self.links.push(pair),
            EdgeKind::AC => self.memberships.push(pair),
            EdgeKind::CC => self.subcategories.push(pair),
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn build(mut self) -> KbGraph {
        let n = self.nodes.len();
        let reversed = |pairs: &[(u32, u32)]| -> Vec<(u32, u32)> { pairs.iter().map(|&(a, b)| (b, a)).collect() };
        let links_out = Csr::build(n, &mut self.links);
        let links_in = Csr::build(n, &mut reversed(&self.links));
        let categories = Csr::build(n, &mut self.memberships);
        let members = Csr::build(n, &mut reversed(&self.memberships));
        let parents = Csr::build(n, &mut self.subcategories);
        let children = Csr::build(n, &mut reversed(&self.subcategories));
        KbGraph {
            nodes: self.nodes,
            links_out,
            links_in,
            categories,
            members,
            parents,
            children,
            title_index: self.title_index,
        }
    }
}

/// Linear merge intersection of two ascending slices.
pub fn intersect_sorted(a: &[NodeId], b: &[NodeId]) -> Vec<NodeId> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// True when every element of ascending `sub` is in ascending `sup`.
pub fn is_sorted_subset(sub: &[NodeId], sup: &[NodeId]) -> bool {
    let mut j = 0;
    for &x in sub {
        while j < sup.len() && sup[j] < x {
            j += 1;
        }
        if j == sup.len() || sup[j] != x {
            return false;
        }
        j += 1;
    }
    true
}
