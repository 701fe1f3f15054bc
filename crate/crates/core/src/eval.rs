//! Precision at k over TREC runs and the paired t-test.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use thiserror::Error;

use crate::search::RankedList;

pub const DEFAULT_KS: [usize; 9] = [5, 10, 15, 20, 30, 100, 200, 500, 1000];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query {0:?} has no relevance judgments")]
    UnknownQuery(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{file}:{line}: {reason}")]
    Format { file: String, line: usize, reason: String },
}

/// Relevance judgments per query.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, HashMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Later judgments for the same pair replace earlier ones.
    pub fn insert(&mut self, query: impl Into<String>, doc: impl Into<String>, rel: u32) {
        self.judgments.entry(query.into()).or_default().insert(doc.into(), rel);
    }

    pub fn parse(text: &str, name: &str) -> Result<Self, EvalError> {
        let mut q = Qrels::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let err = |reason: &str| EvalError::Format {
                file: name.to_string(),
                line: i + 1,
                reason: reason.to_string(),
            };
            if f.len() != 4 {
                return Err(err("expected `qid 0 docid rel`"));
            }
            let rel: i64 = f[3].parse().map_err(|_| err("bad relevance"))?;
            q.insert(f[0], f[2], rel.max(0) as u32);
        }
        Ok(q)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn contains_query(&self, query: &str) -> bool {
        self.judgments.contains_key(query)
    }

    pub fn relevance(&self, query: &str, doc: &str) -> u32 {
        self.judgments.get(query).and_then(|m| m.get(doc)).copied().unwrap_or(0)
    }

    pub fn relevant_count(&self, query: &str) -> usize {
        self.judgments.get(query).map_or(0, |m| m.values().filter(|&&r| r > 0).count())
    }
}

/// Relevant documents in the top `k`, divided by `k` even when fewer were retrieved.
pub fn precision_at_k(run: &RankedList, qrels: &Qrels, k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    let judged = qrels
        .judgments
        .get(&run.request_id)
        .ok_or_else(|| EvalError::UnknownQuery(run.request_id.clone()))?;
    let hits = run
        .doc_ids()
        .take(k)
        .filter(|d| judged.get(*d).is_some_and(|&r| r > 0))
        .count();
    Ok(hits as f64 / k as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    /// One row per judged query, sorted by query id.
    pub per_query: BTreeMap<String, BTreeMap<usize, f64>>,
    pub means: BTreeMap<usize, f64>,
    /// Run queries absent from the qrels; excluded from the means.
    pub unknown_queries: Vec<String>,
}

impl EvalReport {
    /// Per-query precision at `k`, sorted by query id.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.per_query.values().map(|m| m.get(&k).copied().unwrap_or(0.0)).collect()
    }
}

/// Queries judged in `qrels` that have no run score 0 at every k.
pub fn evaluate(runs: &[RankedList], qrels: &Qrels, ks: &[usize]) -> Result<EvalReport, EvalError> {
    if ks.contains(&0) {
        return Err(EvalError::ZeroK);
    }
    let by_query: HashMap<&str, &RankedList> = runs.iter().map(|r| (r.request_id.as_str(), r)).collect();
    let mut unknown: Vec<String> = runs
        .iter()
        .filter(|r| !qrels.contains_query(&r.request_id))
        .map(|r| r.request_id.clone())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    unknown.sort();
    let mut per_query = BTreeMap::new();
    for q in qrels.queries() {
        let row: BTreeMap<usize, f64> = ks
            .iter()
            .map(|&k| {
                let p = match by_query.get(q) {
                    Some(run) => precision_at_k(run, qrels, k)?,
                    None => 0.0,
                };
                Ok((k, p))
            })
            .collect::<Result<_, EvalError>>()?;
        per_query.insert(q.to_string(), row);
    }
    let n = per_query.len();
    let means = ks
        .iter()
        .map(|&k| {
            let sum: f64 = per_query.values().map(|row| row[&k]).sum();
            (k, if n == 0 { 0.0 } else { sum / n as f64 })
        })
        .collect();
    Ok(EvalReport {
        ks: ks.to_vec(),
        per_query,
        means,
        unknown_queries: unknown,
    })
}

/// Tab-separated table: one row per configuration, one column per `P@k`.
pub fn report_table(rows: &[(String, EvalReport)]) -> String {
    let ks: Vec<usize> = rows.first().map(|r| r.1.ks.clone()).unwrap_or_else(|| DEFAULT_KS.to_vec());
    let mut out = String::from("run");
    for k in &ks {
        out.push_str(&format!("\tP@{k}"));
    }
    out.push('\n');
    for (name, report) in rows {
        out.push_str(name);
        for k in &ks {
            out.push_str(&format!("\t{:.4}", report.means.get(k).copied().unwrap_or(0.0)));
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Two-sided paired t-test on `after − before`.
///
/// Zero variance gives `t = 0, p = 1` when every difference is zero and
/// `t = ±∞, p = 0` otherwise.
pub fn paired_t_test(before: &[f64], after: &[f64], alpha: f64) -> Result<TTest, EvalError> {
    if before.len() != after.len() {
        return Err(EvalError::LengthMismatch(before.len(), after.len()));
    }
    let n = before.len();
    if n < 2 {
        return Err(EvalError::TooFewPairs(n));
    }
    let diffs: Vec<f64> = after.iter().zip(before).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (nf - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest {
                t: 0.0,
                p: 1.0,
                significant: false,
            }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                p: 0.0,
                significant: true,
            }
        });
    }
    let t = mean / (var.sqrt() / nf.sqrt());
    let p = student_t_two_sided(t, nf - 1.0);
    Ok(TTest {
        t,
        p,
        significant: p < alpha,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// ln Γ(x) for x > 0, Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta `I_x(a, b)` via the Lentz continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
