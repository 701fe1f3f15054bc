//! Structured queries: an operator tree with the `#combine`, `#weight` and
//! ordered-window `#N` operators, its text rendering and the inverse parser.
//!
//! Rendered grammar (whitespace between items is free):
//!
//! ```text
//! node    := combine | weight | window | term
//! combine := "#combine" "(" node+ ")"
//! weight  := "#weight" "(" (number node)+ ")"
//! window  := "#" digits "(" term+ ")"
//! term    := alphanumeric+
//! ```

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::kb_graph::KbGraph;
use crate::motif::QueryGraph;
use crate::text::tokenize;

#[derive(Clone, Debug, PartialEq)]
pub enum QueryNode {
    Term(String),
    /// Ordered window: tokens in order with gaps of at most `width`. Width 1 is an exact phrase.
    Window { width: u32, tokens: Vec<String> },
    /// Unweighted mean of the children.
    Combine(Vec<QueryNode>),
    /// Weighted mean of the children, weights normalized at scoring time.
    Weight(Vec<(f64, QueryNode)>),
}

impl QueryNode {
    pub fn term(token: impl Into<String>) -> Self {
        QueryNode::Term(token.into())
    }

    pub fn phrase(tokens: Vec<String>) -> Self {
        QueryNode::Window { width: 1, tokens }
    }

    /// Every token mentioned anywhere in the tree, in rendering order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            QueryNode::Term(t) => out.push(t),
            QueryNode::Window { tokens, .. } => out.extend(tokens.iter().map(String::as_str)),
            QueryNode::Combine(children) => children.iter().for_each(|c| c.collect_tokens(out)),
            QueryNode::Weight(entries) => entries.iter().for_each(|(_, c)| c.collect_tokens(out)),
        }
    }
}

impl fmt::Display for QueryNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

/// Integral weights print with one decimal; others use the shortest exact form.
pub fn format_weight(w: f64) -> String {
    if w.fract() == 0.0 && w.abs() < 1e15 {
        format!("{w:.1}")
    } else {
        format!("{w}")
    }
}

pub fn render(q: &QueryNode) -> String {
    let mut out = String::new();
    render_into(q, &mut out);
    out
}

fn render_into(q: &QueryNode, out: &mut String) {
    match q {
        QueryNode::Term(t) => out.push_str(t),
        QueryNode::Window { width, tokens } => {
            let _ = write!(out, "#{width}({})", tokens.join(" "));
        }
        QueryNode::Combine(children) => {
            out.push_str("#combine(");
            for c in children {
                out.push(' ');
                render_into(c, out);
            }
            out.push_str(" )");
        }
        QueryNode::Weight(entries) => {
            out.push_str("#weight(");
            for (w, c) in entries {
                out.push(' ');
                out.push_str(&format_weight(*w));
                out.push(' ');
                render_into(c, out);
            }
            out.push_str(" )");
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("parse error at byte {position}: expected {expected}")]
pub struct ParseError {
    pub position: usize,
    pub expected: String,
}

pub fn parse(text: &str) -> Result<QueryNode, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let node = p.node()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("end of query"));
    }
    Ok(node)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            position: self.pos,
            expected: expected.to_string(),
        }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("{c:?}")))
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &str {
        let start = self.pos;
        let len = self.rest().find(|c: char| !pred(c)).unwrap_or(self.rest().len());
        self.pos += len;
        &self.src[start..start + len]
    }

    fn at_close(&mut self) -> bool {
        self.skip_ws();
        self.peek() == Some(')')
    }

    fn node(&mut self) -> Result<QueryNode, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some('#') => self.operator(),
            Some(c) if c.is_alphanumeric() => Ok(QueryNode::Term(self.token()?)),
            _ => Err(self.error("'#' operator or term")),
        }
    }

    fn token(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let tok = self.take_while(char::is_alphanumeric);
        if tok.is_empty() {
            return Err(self.error("term"));
        }
        Ok(tok.to_lowercase())
    }

    fn operator(&mut self) -> Result<QueryNode, ParseError> {
        self.pos += 1;
        let start = self.pos;
        let name = self.take_while(|c| c.is_ascii_alphanumeric()).to_string();
        match name.as_str() {
            "combine" => {
                self.eat('(')?;
                let mut children = Vec::new();
                while !self.at_close() {
                    children.push(self.node()?);
                }
                if children.is_empty() {
                    return Err(self.error("at least one #combine child"));
                }
                self.eat(')')?;
                Ok(QueryNode::Combine(children))
            }
            "weight" => {
                self.eat('(')?;
                let mut entries = Vec::new();
                while !self.at_close() {
                    let w = self.number()?;
                    entries.push((w, self.node()?));
                }
                if entries.is_empty() {
                    return Err(self.error("at least one #weight entry"));
                }
                self.eat(')')?;
                Ok(QueryNode::Weight(entries))
            }
            digits if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) => {
                let width: u32 = digits.parse().map_err(|_| ParseError {
                    position: start,
                    expected: "window width".into(),
                })?;
                if width == 0 {
                    return Err(ParseError {
                        position: start,
                        expected: "window width >= 1".into(),
                    });
                }
                self.eat('(')?;
                let mut tokens = Vec::new();
                while !self.at_close() {
                    tokens.push(self.token()?);
                }
                if tokens.is_empty() {
                    return Err(self.error("at least one window term"));
                }
                self.eat(')')?;
                Ok(QueryNode::Window { width, tokens })
            }
            _ => Err(ParseError {
                position: start,
                expected: "combine, weight or a window width".into(),
            }),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        self.take_while(|c| c.is_ascii_digit());
        if self.peek() == Some('.') {
            self.pos += 1;
            self.take_while(|c| c.is_ascii_digit());
        }
        let text = &self.src[start..self.pos];
        match text.parse::<f64>() {
            Ok(w) if w > 0.0 && w.is_finite() => Ok(w),
            _ => {
                self.pos = start;
                Err(self.error("positive weight"))
            }
        }
    }
}

/// The three query components and their combination.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedQuery {
    pub input_part: QueryNode,
    pub entity_part: Option<QueryNode>,
    pub feature_part: Option<QueryNode>,
    pub root: QueryNode,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query has no input tokens")]
    EmptyInput,
}

/// Builds `#combine(input entities features)` from the request tokens, the
/// titles of its input nodes and the query graph.
///
/// Features are `#1` phrases of expansion titles weighted by motif count,
/// ordered by weight descending then title ascending. Titles that tokenize to
/// nothing are dropped.
pub fn build_expanded_query(
    input_tokens: &[String],
    entity_titles: &[String],
    qg: Option<&QueryGraph>,
    g: &KbGraph,
) -> Result<ExpandedQuery, QueryError> {
    let input_terms: Vec<QueryNode> = input_tokens
        .iter()
        .flat_map(|t| tokenize(t))
        .map(QueryNode::Term)
        .collect();
    if input_terms.is_empty() {
        return Err(QueryError::EmptyInput);
    }
    let input_part = QueryNode::Combine(input_terms);

    let entities: Vec<QueryNode> = entity_titles
        .iter()
        .map(|t| tokenize(t))
        .filter(|toks| !toks.is_empty())
        .map(QueryNode::phrase)
        .collect();
    let entity_part = (!entities.is_empty()).then_some(QueryNode::Combine(entities));

    let features: Vec<(f64, QueryNode)> = qg
        .map(|qg| {
            qg.ranked(g)
                .into_iter()
                .filter_map(|(id, w)| {
                    let toks = tokenize(g.title(id));
                    (!toks.is_empty()).then_some((w as f64, QueryNode::phrase(toks)))
                })
                .collect()
        })
        .unwrap_or_default();
    let feature_part = (!features.is_empty()).then_some(QueryNode::Weight(features));

    let mut parts = vec![input_part.clone()];
    parts.extend(entity_part.clone());
    parts.extend(feature_part.clone());
    Ok(ExpandedQuery {
        input_part,
        entity_part,
        feature_part,
        root: QueryNode::Combine(parts),
    })
}

/// Parses a query file: one rendered query per line, optionally prefixed by `<qid>\t`.
/// Lines without a qid are numbered from 1.
pub fn parse_query_file(text: &str) -> Result<Vec<(String, QueryNode)>, (usize, ParseError)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (qid, query) = match line.split_once('\t') {
            Some((qid, q)) => (qid.trim().to_string(), q),
            None => ((i + 1).to_string(), line),
        };
        out.push((qid, parse(query).map_err(|e| (i + 1, e))?));
    }
    Ok(out)
}
