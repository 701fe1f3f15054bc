//! Seeded random knowledge-base graphs for tests, benchmarks and smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kb_graph::{EdgeKind, KbGraph, KbGraphBuilder, NodeId, NodeKind};

#[derive(Clone, Copy, Debug)]
pub struct GraphShape {
    pub articles: usize,
    pub categories: usize,
    /// Directed article links drawn before reciprocation.
    pub links: usize,
    /// Probability that a drawn link also gets its reverse.
    pub reciprocity: f64,
    /// Inclusive range of categories per article.
    pub categories_per_article: (usize, usize),
    pub subcategory_links: usize,
    /// Articles per topical community; categories are split over the same
    /// number of communities.
    pub community_size: usize,
    /// Probability that a link, membership or subcategory edge stays inside
    /// its community.
    pub locality: f64,
    /// Popularity exponent: `1.0` picks uniformly, larger values concentrate
    /// edges on the first members of each community.
    pub skew: f64,
}

impl GraphShape {
    pub fn small(nodes: usize) -> Self {
        let categories = (nodes / 4).max(1);
        let articles = nodes.saturating_sub(categories).max(1);
        GraphShape {
            articles,
            categories,
            links: articles * 3,
            reciprocity: 0.5,
            categories_per_article: (0, 2),
            subcategory_links: categories,
            community_size: articles,
            locality: 1.0,
            skew: 1.0,
        }
    }

    /// Roughly `nodes` nodes and `edges` stored edges, Wikipedia-like proportions.
    pub fn large(nodes: usize, edges: usize) -> Self {
        let categories = nodes / 10;
        let articles = nodes - categories;
        let membership = articles * 3;
        let subcategory_links = categories * 2;
        // Reciprocation adds ~30% and skewed picks repeat ~10% of the links.
        let links = edges.saturating_sub(membership + subcategory_links) * 10 / 13 * 9 / 8;
        GraphShape {
            articles,
            categories,
            links,
            reciprocity: 0.3,
            categories_per_article: (1, 5),
            subcategory_links,
            community_size: 100,
            locality: 0.9,
            skew: 2.0,
        }
    }
}

/// Contiguous id blocks, one per community.
struct Blocks {
    len: usize,
    count: usize,
}

impl Blocks {
    fn range(&self, block: usize) -> (usize, usize) {
        let lo = block * self.len / self.count;
        let hi = ((block + 1) * self.len / self.count).max(lo + 1).min(self.len);
        (lo, hi)
    }

    fn block_of(&self, i: usize) -> usize {
        ((i + 1) * self.count - 1) / self.len
    }
}

fn pick(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize), skew: f64) -> usize {
    let u: f64 = rng.gen::<f64>().powf(skew);
    (lo + (u * (hi - lo) as f64) as usize).min(hi - 1)
}

pub fn random_graph(shape: GraphShape, seed: u64) -> KbGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = KbGraphBuilder::new();
    let articles: Vec<NodeId> = (0..shape.articles)
        .map(|i| b.add(NodeKind::Article, &format!("article {i}")).unwrap())
        .collect();
    let categories: Vec<NodeId> = (0..shape.categories)
        .map(|i| b.add(NodeKind::Category, &format!("category {i}")).unwrap())
        .collect();
    let communities = shape.articles.div_ceil(shape.community_size.max(1)).max(1);
    let art_blocks = Blocks { len: articles.len(), count: communities.min(articles.len().max(1)) };
    let cat_blocks = Blocks { len: categories.len(), count: communities.min(categories.len().max(1)) };
    let local = |rng: &mut ChaCha8Rng| rng.gen_bool(shape.locality);

    if articles.len() > 1 {
        for _ in 0..shape.links {
            let block = rng.gen_range(0..art_blocks.count);
            let a = pick(&mut rng, art_blocks.range(block), shape.skew);
            let c = if local(&mut rng) {
                pick(&mut rng, art_blocks.range(block), shape.skew)
            } else {
                rng.gen_range(0..articles.len())
            };
            if a == c {
                continue;
            }
            b.add_edge(articles[a], articles[c], EdgeKind::AA).unwrap();
            if rng.gen_bool(shape.reciprocity) {
                b.add_edge(articles[c], articles[a], EdgeKind::AA).unwrap();
            }
        }
    }
    if !categories.is_empty() {
        let (lo, hi) = shape.categories_per_article;
        for (i, &a) in articles.iter().enumerate() {
            let home = art_blocks.block_of(i) * cat_blocks.count / art_blocks.count;
            let want = rng.gen_range(lo..=hi).min(categories.len());
            let mut chosen = Vec::with_capacity(want);
            for _ in 0..want * 8 {
                if chosen.len() == want {
                    break;
                }
                let c = if local(&mut rng) {
                    pick(&mut rng, cat_blocks.range(home), shape.skew)
                } else {
                    rng.gen_range(0..categories.len())
                };
                if !chosen.contains(&c) {
                    chosen.push(c);
                    b.add_edge(a, categories[c], EdgeKind::AC).unwrap();
                }
            }
        }
    }
    if categories.len() > 1 {
        for _ in 0..shape.subcategory_links {
            let c1 = rng.gen_range(0..categories.len());
            let c2 = if local(&mut rng) {
                pick(&mut rng, cat_blocks.range(cat_blocks.block_of(c1)), 1.0)
            } else {
                rng.gen_range(0..categories.len())
            };
            if c1 != c2 {
                b.add_edge(categories[c1], categories[c2], EdgeKind::CC).unwrap();
            }
        }
    }
    b.build()
}

/// Dense random graph over `n` nodes: each valid ordered pair gets an edge with probability `p`.
pub fn dense_random_graph(n: usize, p: f64, seed: u64) -> KbGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds: Vec<NodeKind> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.6) {
                NodeKind::Article
            } else {
                NodeKind::Category
            }
        })
        .collect();
    let mut b = KbGraphBuilder::new();
    for (i, &k) in kinds.iter().enumerate() {
        b.add(k, &format!("n{i}")).unwrap();
    }
    for (s, d, k) in candidate_edges(&kinds) {
        if rng.gen_bool(p) {
            b.add_edge(s, d, k).unwrap();
        }
    }
    b.build()
}

/// Every valid directed edge between `n` nodes of the given kinds, in a fixed order.
pub fn candidate_edges(kinds: &[NodeKind]) -> Vec<(NodeId, NodeId, EdgeKind)> {
    let mut out = Vec::new();
    for s in 0..kinds.len() {
        for d in 0..kinds.len() {
            if s == d {
                continue;
            }
            let kind = match (kinds[s], kinds[d]) {
                (NodeKind::Article, NodeKind::Article) => EdgeKind::AA,
                (NodeKind::Article, NodeKind::Category) => EdgeKind::AC,
                (NodeKind::Category, NodeKind::Category) => EdgeKind::CC,
                (NodeKind::Category, NodeKind::Article) => continue,
            };
            out.push((NodeId(s as u32), NodeId(d as u32), kind));
        }
    }
    out
}

/// Builds a graph with the given node kinds and the subset of `candidates` selected by `mask`.
pub fn graph_from_mask(kinds: &[NodeKind], candidates: &[(NodeId, NodeId, EdgeKind)], mask: u64) -> KbGraph {
    let mut b = KbGraphBuilder::new();
    for (i, &k) in kinds.iter().enumerate() {
        b.add(k, &format!("n{i}")).unwrap();
    }
    for (bit, &(s, d, k)) in candidates.iter().enumerate() {
        if mask >> bit & 1 == 1 {
            b.add_edge(s, d, k).unwrap();
        }
    }
    b.build()
}
