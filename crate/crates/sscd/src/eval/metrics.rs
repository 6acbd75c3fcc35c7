//! Retrieval metrics over candidate lists.
//!
//! Micro average precision ranks ALL candidates across queries by score: a
//! single global threshold sweep, sensitive to cross-query score
//! calibration. Mean average precision, recall@1 and MRR are per-query
//! ranking metrics. Ties are processed as a block (precision evaluated after
//! the whole tie group), which makes every metric invariant to candidate
//! input order.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::histogram::Histogram;
use super::knn::MatchCandidate;

/// The set of true (query, reference) copy pairs.
///
/// Queries without any pair are permitted; their candidates count as false
/// positives in the global sweep and they are excluded from per-query metric
/// denominators.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    per_query: HashMap<String, HashSet<String>>,
    total_positives: usize,
}

impl GroundTruth {
    pub fn new<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut per_query: HashMap<String, HashSet<String>> = HashMap::new();
        let mut total = 0;
        for (q, r) in pairs {
            if per_query.entry(q).or_default().insert(r) {
                total += 1;
            }
        }
        Self {
            per_query,
            total_positives: total,
        }
    }

    pub fn total_positives(&self) -> usize {
        self.total_positives
    }

    pub fn contains(&self, query_id: &str, ref_id: &str) -> bool {
        self.per_query
            .get(query_id)
            .is_some_and(|refs| refs.contains(ref_id))
    }

    pub fn positives_for(&self, query_id: &str) -> usize {
        self.per_query.get(query_id).map_or(0, |refs| refs.len())
    }

    /// Query ids that have at least one true pair, sorted.
    pub fn queries_with_positives(&self) -> Vec<&str> {
        let mut qs: Vec<&str> = self
            .per_query
            .iter()
            .filter(|(_, refs)| !refs.is_empty())
            .map(|(q, _)| q.as_str())
            .collect();
        qs.sort_unstable();
        qs
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.per_query
            .iter()
            .flat_map(|(q, refs)| refs.iter().map(move |r| (q.as_str(), r.as_str())))
    }
}

/// One point of the precision-recall tradeoff at a score threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// The full metric suite for a retrieval run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_ap: f64,
    pub mean_ap: f64,
    pub recall_at_1: f64,
    pub mrr: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub pr_points: Vec<PrPoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub positive_histogram: Option<Histogram>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub negative_histogram: Option<Histogram>,
}

impl EvalReport {
    /// Compute the four headline metrics (and PR curve) from candidates.
    pub fn from_candidates(candidates: &[MatchCandidate], gt: &GroundTruth) -> Self {
        let (micro, pr) = micro_ap(candidates, gt);
        Self {
            micro_ap: micro,
            mean_ap: mean_ap(candidates, gt),
            recall_at_1: recall_at_1(candidates, gt),
            mrr: mrr(candidates, gt),
            pr_points: pr,
            positive_histogram: None,
            negative_histogram: None,
        }
    }
}

/// Micro average precision: sort all candidates by descending score (global
/// threshold sweep); every true-positive block contributes
/// `precision-at-block x block-recall-increment`, with recall measured
/// against the total number of true pairs.
pub fn micro_ap(candidates: &[MatchCandidate], gt: &GroundTruth) -> (f64, Vec<PrPoint>) {
    if gt.total_positives() == 0 {
        return (0.0, Vec::new());
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        candidates[b]
            .score
            .partial_cmp(&candidates[a].score)
            .expect("scores are finite")
    });

    let total = gt.total_positives() as f64;
    let mut ap = 0.0;
    let mut pr_points = Vec::new();
    let mut cum_tp = 0usize;
    let mut cum_seen = 0usize;

    let mut i = 0;
    while i < order.len() {
        // tie block: all candidates sharing this score
        let score = candidates[order[i]].score;
        let mut j = i;
        let mut block_tp = 0;
        while j < order.len() && candidates[order[j]].score == score {
            let c = &candidates[order[j]];
            if gt.contains(&c.query_id, &c.ref_id) {
                block_tp += 1;
            }
            j += 1;
        }
        cum_tp += block_tp;
        cum_seen += j - i;
        let precision = cum_tp as f64 / cum_seen as f64;
        let recall = cum_tp as f64 / total;
        if block_tp > 0 {
            ap += (block_tp as f64 / total) * precision;
        }
        pr_points.push(PrPoint { recall, precision });
        i = j;
    }
    (ap, pr_points)
}

/// Candidate indices for one query, best first (score desc, ref id asc).
fn ranked_per_query(candidates: &[MatchCandidate]) -> BTreeMap<&str, Vec<&MatchCandidate>> {
    let mut by_query: BTreeMap<&str, Vec<&MatchCandidate>> = BTreeMap::new();
    for c in candidates {
        by_query.entry(c.query_id.as_str()).or_default().push(c);
    }
    for ranked in by_query.values_mut() {
        ranked.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then_with(|| a.ref_id.cmp(&b.ref_id))
        });
    }
    by_query
}

/// Mean over queries (that have at least one true pair) of per-query average
/// precision, each against that query's own positive count.
pub fn mean_ap(candidates: &[MatchCandidate], gt: &GroundTruth) -> f64 {
    let queries = gt.queries_with_positives();
    if queries.is_empty() {
        return 0.0;
    }
    let by_query = ranked_per_query(candidates);
    let mut sum = 0.0;
    for q in &queries {
        let positives = gt.positives_for(q) as f64;
        let Some(ranked) = by_query.get(q) else {
            continue; // no candidates: AP 0
        };
        let mut ap = 0.0;
        let mut cum_tp = 0usize;
        let mut cum_seen = 0usize;
        let mut i = 0;
        while i < ranked.len() {
            let score = ranked[i].score;
            let mut j = i;
            let mut block_tp = 0;
            while j < ranked.len() && ranked[j].score == score {
                if gt.contains(q, &ranked[j].ref_id) {
                    block_tp += 1;
                }
                j += 1;
            }
            cum_tp += block_tp;
            cum_seen += j - i;
            if block_tp > 0 {
                ap += (block_tp as f64 / positives) * (cum_tp as f64 / cum_seen as f64);
            }
            i = j;
        }
        sum += ap;
    }
    sum / queries.len() as f64
}

/// Fraction of queries (with >= 1 true pair) whose top candidate is a true
/// pair.
pub fn recall_at_1(candidates: &[MatchCandidate], gt: &GroundTruth) -> f64 {
    let queries = gt.queries_with_positives();
    if queries.is_empty() {
        return 0.0;
    }
    let by_query = ranked_per_query(candidates);
    let hits = queries
        .iter()
        .filter(|q| {
            by_query
                .get(*q)
                .and_then(|ranked| ranked.first())
                .is_some_and(|c| gt.contains(q, &c.ref_id))
        })
        .count();
    hits as f64 / queries.len() as f64
}

/// Mean reciprocal rank of the first true pair per query (0 when absent),
/// over queries with >= 1 true pair.
pub fn mrr(candidates: &[MatchCandidate], gt: &GroundTruth) -> f64 {
    let queries = gt.queries_with_positives();
    if queries.is_empty() {
        return 0.0;
    }
    let by_query = ranked_per_query(candidates);
    let mut sum = 0.0;
    for q in &queries {
        if let Some(ranked) = by_query.get(q) {
            if let Some(pos) = ranked.iter().position(|c| gt.contains(q, &c.ref_id)) {
                sum += 1.0 / (pos + 1) as f64;
            }
        }
    }
    sum / queries.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(q: &str, r: &str, s: f64) -> MatchCandidate {
        MatchCandidate {
            query_id: q.to_string(),
            ref_id: r.to_string(),
            score: s,
        }
    }

    fn gt(pairs: &[(&str, &str)]) -> GroundTruth {
        GroundTruth::new(pairs.iter().map(|(q, r)| (q.to_string(), r.to_string())))
    }

    #[test]
    fn hand_worked_micro_ap() {
        let truth = gt(&[("q1", "r1"), ("q2", "r2")]);
        let candidates = vec![
            cand("q1", "r1", 0.9),
            cand("q1", "r3", 0.8),
            cand("q2", "r2", 0.7),
        ];
        let (ap, pr) = micro_ap(&candidates, &truth);
        // (1/2)(1/1) + (1/2)(2/3)
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(pr.len(), 3);
        for w in pr.windows(2) {
            assert!(w[0].recall <= w[1].recall);
        }
    }

    #[test]
    fn perfect_retrieval_scores_one() {
        let truth = gt(&[("q1", "r1"), ("q2", "r2")]);
        let candidates = vec![
            cand("q1", "r1", 0.9),
            cand("q2", "r2", 0.8),
            cand("q1", "r3", 0.2),
        ];
        let (ap, _) = micro_ap(&candidates, &truth);
        assert_eq!(ap, 1.0);
        assert_eq!(recall_at_1(&candidates, &truth), 1.0);
        assert_eq!(mrr(&candidates, &truth), 1.0);
        assert_eq!(mean_ap(&candidates, &truth), 1.0);
    }

    #[test]
    fn no_true_pair_retrieved_scores_zero() {
        let truth = gt(&[("q1", "r1")]);
        let candidates = vec![cand("q1", "r9", 0.9), cand("q1", "r8", 0.5)];
        let (ap, _) = micro_ap(&candidates, &truth);
        assert_eq!(ap, 0.0);
        assert_eq!(recall_at_1(&candidates, &truth), 0.0);
        assert_eq!(mrr(&candidates, &truth), 0.0);
    }

    #[test]
    fn mean_ap_true_pair_ranked_second_of_two() {
        let truth = gt(&[("q1", "r1")]);
        let candidates = vec![cand("q1", "r2", 0.9), cand("q1", "r1", 0.5)];
        assert!((mean_ap(&candidates, &truth) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mean_ap_equals_micro_ap_for_single_covered_query() {
        let truth = gt(&[("q1", "r1"), ("q1", "r4")]);
        let candidates = vec![
            cand("q1", "r1", 0.9),
            cand("q1", "r2", 0.7),
            cand("q1", "r4", 0.5),
            cand("q1", "r5", 0.1),
        ];
        let (ap, _) = micro_ap(&candidates, &truth);
        let map = mean_ap(&candidates, &truth);
        assert!((ap - map).abs() < 1e-12);
    }

    #[test]
    fn first_correct_at_rank_four() {
        let truth = gt(&[("q1", "r1")]);
        let candidates = vec![
            cand("q1", "a", 0.9),
            cand("q1", "b", 0.8),
            cand("q1", "c", 0.7),
            cand("q1", "r1", 0.6),
        ];
        assert_eq!(recall_at_1(&candidates, &truth), 0.0);
        assert!((mrr(&candidates, &truth) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn unpaired_queries_excluded_from_per_query_denominators() {
        let truth = gt(&[("q1", "r1")]);
        // q2 has no ground-truth pair: its candidates are global FPs but it
        // does not enter recall@1 / MRR / mAP denominators
        let candidates = vec![cand("q1", "r1", 0.9), cand("q2", "r7", 0.95)];
        assert_eq!(recall_at_1(&candidates, &truth), 1.0);
        assert_eq!(mrr(&candidates, &truth), 1.0);
        assert_eq!(mean_ap(&candidates, &truth), 1.0);
        let (ap, _) = micro_ap(&candidates, &truth);
        // the q2 FP outranks the q1 TP: precision at the hit is 1/2
        assert!((ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn micro_ap_invariant_under_monotone_score_transform() {
        let truth = gt(&[("q1", "r1"), ("q2", "r2"), ("q3", "r3")]);
        let candidates = vec![
            cand("q1", "r1", 0.9),
            cand("q1", "r2", 0.85),
            cand("q2", "r2", 0.4),
            cand("q2", "r1", 0.2),
            cand("q3", "r9", 0.95),
            cand("q3", "r3", 0.05),
        ];
        let (base, _) = micro_ap(&candidates, &truth);
        let transformed: Vec<MatchCandidate> = candidates
            .iter()
            .map(|c| cand(&c.query_id, &c.ref_id, (c.score * 3.0).exp()))
            .collect();
        let (t, _) = micro_ap(&transformed, &truth);
        assert!((base - t).abs() < 1e-12);
    }

    #[test]
    fn metrics_invariant_under_input_order() {
        let truth = gt(&[("q1", "r1"), ("q2", "r2")]);
        let mut candidates = vec![
            cand("q1", "r1", 0.9),
            cand("q1", "r3", 0.8),
            cand("q2", "r2", 0.7),
            cand("q2", "r4", 0.7),
        ];
        let (a, _) = micro_ap(&candidates, &truth);
        let m1 = (
            mean_ap(&candidates, &truth),
            recall_at_1(&candidates, &truth),
            mrr(&candidates, &truth),
        );
        candidates.reverse();
        let (b, _) = micro_ap(&candidates, &truth);
        let m2 = (
            mean_ap(&candidates, &truth),
            recall_at_1(&candidates, &truth),
            mrr(&candidates, &truth),
        );
        assert_eq!(a, b);
        assert_eq!(m1, m2);
    }

    #[test]
    fn low_scored_extra_candidate_never_changes_recall_at_1() {
        let truth = gt(&[("q1", "r1")]);
        let mut candidates = vec![cand("q1", "r1", 0.9), cand("q1", "r2", 0.5)];
        let before = recall_at_1(&candidates, &truth);
        candidates.push(cand("q1", "r8", -5.0));
        assert_eq!(recall_at_1(&candidates, &truth), before);
    }
}
