//! Dictionary entity linker: greedy left-to-right longest match of request
//! n-grams against article titles.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use thiserror::Error;

use crate::kb_graph::{KbGraph, NodeId};
use crate::text::{normalize_title, tokenize};

pub const DEFAULT_MAX_NGRAM: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputRequest {
    pub request_id: String,
    pub text: String,
}

impl InputRequest {
    pub fn new(request_id: impl Into<String>, text: impl Into<String>) -> Self {
        InputRequest {
            request_id: request_id.into(),
            text: text.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkedEntities {
    pub request_id: String,
    pub input_nodes: Vec<NodeId>,
    /// Half-open token span `[start, end)` of each node's first mention.
    pub matched_spans: Vec<(usize, usize)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkError {
    #[error("request {0:?} has empty text")]
    EmptyRequest(String),
    #[error("no entities found in request {0:?}")]
    NoEntities(String),
    #[error("max_ngram must be at least 1")]
    BadMaxNgram,
}

/// Token-sequence dictionary over the article titles of one graph.
///
/// Titles are keyed by their token form, so `Above_(artist)` is matched by
/// the request words `above artist`. When two titles share a token form the
/// one earliest in the nodes file wins.
#[derive(Clone, Debug)]
pub struct EntityLinker {
    dictionary: HashMap<String, NodeId>,
    longest_title: usize,
}

impl EntityLinker {
    pub fn new(g: &KbGraph) -> Self {
        Self::with_stop_titles(g, &HashSet::new())
    }

    /// `stop_titles` holds normalized titles that are never linked.
    pub fn with_stop_titles(g: &KbGraph, stop_titles: &HashSet<String>) -> Self {
        let mut dictionary = HashMap::new();
        let mut longest_title = 0;
        for id in g.articles() {
            let title = g.title(id);
            if stop_titles.contains(&normalize_title(title)) {
                continue;
            }
            let tokens = tokenize(title);
            if tokens.is_empty() {
                continue;
            }
            longest_title = longest_title.max(tokens.len());
            dictionary.entry(tokens.join(" ")).or_insert(id);
        }
        EntityLinker {
            dictionary,
            longest_title,
        }
    }

    pub fn link(&self, req: &InputRequest, max_ngram: usize) -> Result<LinkedEntities, LinkError> {
        if max_ngram == 0 {
            return Err(LinkError::BadMaxNgram);
        }
        if req.text.trim().is_empty() {
            return Err(LinkError::EmptyRequest(req.request_id.clone()));
        }
        let tokens = tokenize(&req.text);
        let longest = max_ngram.min(self.longest_title);
        let mut input_nodes = Vec::new();
        let mut matched_spans = Vec::new();
        let mut seen = HashSet::new();
        let mut pos = 0;
        while pos < tokens.len() {
            let max_n = longest.min(tokens.len() - pos);
            let hit = (1..=max_n)
                .rev()
                .find_map(|n| self.dictionary.get(&tokens[pos..pos + n].join(" ")).map(|&id| (id, n)));
            match hit {
                Some((id, n)) => {
                    if seen.insert(id) {
                        input_nodes.push(id);
                        matched_spans.push((pos, pos + n));
                    }
                    pos += n;
                }
                None => pos += 1,
            }
        }
        if input_nodes.is_empty() {
            return Err(LinkError::NoEntities(req.request_id.clone()));
        }
        Ok(LinkedEntities {
            request_id: req.request_id.clone(),
            input_nodes,
            matched_spans,
        })
    }
}

/// One-shot linking without a prebuilt dictionary.
pub fn link(g: &KbGraph, req: &InputRequest, max_ngram: usize) -> Result<LinkedEntities, LinkError> {
    EntityLinker::new(g).link(req, max_ngram)
}

/// Reads a stop-title list: one title per line, normalized on read.
pub fn read_stop_titles(path: impl AsRef<Path>) -> std::io::Result<HashSet<String>> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(normalize_title)
        .filter(|t| !t.is_empty())
        .collect())
}
