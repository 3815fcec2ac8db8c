//! Ranking-quality metrics over word-level result lists.
//!
//! All metrics use binary relevance. A ranking is a deduplicated list of word
//! ids, best first, capped at [`RESULT_LIMIT`] entries. When no relevant word
//! is retrieved, the first-relevant rank is reported as [`MISS_RANK`] and the
//! reciprocal rank as 0.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::WordId;

/// Maximum number of words a ranking may hold.
pub const RESULT_LIMIT: usize = 100;

/// Rank assigned to queries with no relevant word in the ranking.
pub const MISS_RANK: usize = 1000;

/// Cut-offs reported for MP@k and Acc@k.
pub const REPORTED_CUTOFFS: [usize; 2] = [1, 10];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("ranking for query {query_id} repeats word {word_id}")]
    DuplicateWord { query_id: u64, word_id: WordId },
    #[error("ranking for query {query_id} has {len} entries, limit is {RESULT_LIMIT}")]
    TooLong { query_id: u64, len: usize },
    #[error("no judgments to aggregate")]
    EmptyJudgments,
    #[error("query {query_id}: relevant-set size must be >= 1")]
    ZeroRelSize { query_id: u64 },
}

/// Word ids retrieved for one query, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedResult {
    query_id: u64,
    words: Vec<WordId>,
}

impl RankedResult {
    pub fn new(query_id: u64, words: Vec<WordId>) -> Result<Self, MetricsError> {
        if words.len() > RESULT_LIMIT {
            return Err(MetricsError::TooLong {
                query_id,
                len: words.len(),
            });
        }
        let mut seen = HashSet::with_capacity(words.len());
        if let Some(&word_id) = words.iter().find(|w| !seen.insert(**w)) {
            return Err(MetricsError::DuplicateWord { query_id, word_id });
        }
        Ok(Self { query_id, words })
    }

    pub fn query_id(&self) -> u64 {
        self.query_id
    }

    pub fn words(&self) -> &[WordId] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryJudgment {
    pub ranked: RankedResult,
    pub relevant: BTreeSet<WordId>,
}

impl QueryJudgment {
    pub fn new(ranked: RankedResult, relevant: BTreeSet<WordId>) -> Self {
        Self { ranked, relevant }
    }

    fn hits(&self) -> impl Iterator<Item = bool> + '_ {
        self.ranked.words.iter().map(|w| self.relevant.contains(w))
    }
}

/// `|Res[1..k] ∩ Rel| / k`; short rankings are not renormalized.
pub fn precision_at_k(j: &QueryJudgment, k: usize) -> f64 {
    assert!(k >= 1, "precision_at_k needs k >= 1");
    let found = j.hits().take(k).filter(|&r| r).count();
    found as f64 / k as f64
}

/// Sum of precision at each relevant position, divided by `rel_size`.
pub fn average_precision(j: &QueryJudgment, rel_size: usize) -> f64 {
    assert!(rel_size >= 1, "average_precision needs rel_size >= 1");
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, relevant) in j.hits().enumerate() {
        if relevant {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    sum / rel_size as f64
}

fn first_relevant_rank(j: &QueryJudgment) -> Option<usize> {
    j.hits().position(|r| r).map(|i| i + 1)
}

/// `1 / rank` of the first relevant word; 0 when none was retrieved.
pub fn reciprocal_rank(j: &QueryJudgment) -> f64 {
    first_relevant_rank(j).map_or(0.0, |r| 1.0 / r as f64)
}

/// Rank of the first relevant word, or `cap` when none was retrieved.
pub fn first_relevant_rank_capped(j: &QueryJudgment, cap: usize) -> usize {
    debug_assert!(cap > RESULT_LIMIT);
    first_relevant_rank(j).unwrap_or(cap)
}

/// 1 if any of the first `k` words is relevant, else 0.
pub fn accuracy_at_k(j: &QueryJudgment, k: usize) -> f64 {
    assert!(k >= 1, "accuracy_at_k needs k >= 1");
    if j.hits().take(k).any(|r| r) {
        1.0
    } else {
        0.0
    }
}

/// A judgment ready for aggregation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgedQuery {
    pub judgment: QueryJudgment,
    /// Denominator of AP: relevant words that could be retrieved at all.
    pub rel_size: usize,
    /// Labeled runs only: whether the best-scoring definition of the target
    /// word was the linked sense. `None` when not applicable.
    pub linked_sense: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRecord {
    pub query_id: u64,
    pub ap: f64,
    pub rr: f64,
    pub first_relevant_rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linked_sense: Option<bool>,
}

/// Aggregated metrics over a query set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub map: f64,
    pub mp_at: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub acc_at: BTreeMap<usize, f64>,
    pub median_rank: usize,
    pub query_count: usize,
    pub per_query: Vec<QueryRecord>,
    /// Fraction of labeled queries whose target word was reached through the
    /// linked sense.
    pub linked_sense_rate: Option<f64>,
}

/// Means of AP, P@k, RR and Acc@k, and the median of capped first-relevant
/// ranks (lower middle for an even count).
pub fn aggregate(judged: &[JudgedQuery]) -> Result<EvalReport, MetricsError> {
    if judged.is_empty() {
        return Err(MetricsError::EmptyJudgments);
    }
    if let Some(q) = judged.iter().find(|q| q.rel_size == 0) {
        return Err(MetricsError::ZeroRelSize {
            query_id: q.judgment.ranked.query_id,
        });
    }
    let n = judged.len() as f64;
    let mean = |f: &dyn Fn(&JudgedQuery) -> f64| judged.iter().map(f).sum::<f64>() / n;

    let per_query: Vec<QueryRecord> = judged
        .iter()
        .map(|q| QueryRecord {
            query_id: q.judgment.ranked.query_id,
            ap: average_precision(&q.judgment, q.rel_size),
            rr: reciprocal_rank(&q.judgment),
            first_relevant_rank: first_relevant_rank_capped(&q.judgment, MISS_RANK),
            linked_sense: q.linked_sense,
        })
        .collect();

    let mp_at: BTreeMap<usize, f64> = REPORTED_CUTOFFS
        .iter()
        .map(|&k| (k, mean(&|q| precision_at_k(&q.judgment, k))))
        .collect();
    let acc_at: BTreeMap<usize, f64> = REPORTED_CUTOFFS
        .iter()
        .map(|&k| (k, mean(&|q| accuracy_at_k(&q.judgment, k))))
        .collect();
    assert_eq!(
        acc_at[&1].to_bits(),
        mp_at[&1].to_bits(),
        "Acc@1 must equal MP@1"
    );

    let mut ranks: Vec<usize> = per_query.iter().map(|r| r.first_relevant_rank).collect();
    ranks.sort_unstable();
    let median_rank = ranks[(ranks.len() - 1) / 2];

    let linked: Vec<bool> = judged.iter().filter_map(|q| q.linked_sense).collect();
    let linked_sense_rate = (!linked.is_empty())
        .then(|| linked.iter().filter(|&&b| b).count() as f64 / linked.len() as f64);

    Ok(EvalReport {
        map: per_query.iter().map(|r| r.ap).sum::<f64>() / n,
        mp_at,
        mrr: per_query.iter().map(|r| r.rr).sum::<f64>() / n,
        acc_at,
        median_rank,
        query_count: judged.len(),
        per_query,
        linked_sense_rate,
    })
}

/// Column block in the fixed report order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportColumns {
    #[serde(rename = "MAP")]
    pub map: f64,
    #[serde(rename = "MP@1")]
    pub mp1: f64,
    #[serde(rename = "MP@10")]
    pub mp10: f64,
    #[serde(rename = "MRR")]
    pub mrr: f64,
    #[serde(rename = "Acc@1")]
    pub acc1: f64,
    #[serde(rename = "Acc@10")]
    pub acc10: f64,
    #[serde(rename = "Median Rank")]
    pub median_rank: usize,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    columns: ReportColumns,
    query_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    linked_sense_rate: Option<f64>,
    per_query: &'a [QueryRecord],
}

impl EvalReport {
    pub fn columns(&self) -> ReportColumns {
        ReportColumns {
            map: self.map,
            mp1: self.mp_at[&1],
            mp10: self.mp_at[&10],
            mrr: self.mrr,
            acc1: self.acc_at[&1],
            acc10: self.acc_at[&10],
            median_rank: self.median_rank,
        }
    }

    /// `key=value` lines in report column order.
    pub fn to_text(&self) -> String {
        let c = self.columns();
        let mut s = String::new();
        let _ = writeln!(s, "queries={}", self.query_count);
        let _ = writeln!(s, "MAP={:.4}", c.map);
        let _ = writeln!(s, "MP@1={:.4}", c.mp1);
        let _ = writeln!(s, "MP@10={:.4}", c.mp10);
        let _ = writeln!(s, "MRR={:.4}", c.mrr);
        let _ = writeln!(s, "Acc@1={:.4}", c.acc1);
        let _ = writeln!(s, "Acc@10={:.4}", c.acc10);
        let _ = writeln!(s, "MedianRank={}", c.median_rank);
        if let Some(rate) = self.linked_sense_rate {
            let _ = writeln!(s, "LinkedSense={rate:.4}");
        }
        s
    }

    /// Pretty-printed JSON with the columns in report order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ReportFile {
            columns: self.columns(),
            query_count: self.query_count,
            linked_sense_rate: self.linked_sense_rate,
            per_query: &self.per_query,
        })
        .expect("report serializes")
    }
}
