//! Exhaustive k-nearest-neighbor search via blocked matrix products.
//!
//! No approximate indexing: every query is scored against every reference.
//! References are processed in blocks so a million-row search stays within a
//! bounded working set; blocks run in parallel and are merged in a fixed
//! order, so results are bitwise independent of the thread count.

use ndarray::{s, Axis};
use rayon::prelude::*;

use crate::descriptor::DescriptorSet;
use crate::error::{Error, Result};

/// Reference rows scored per block; sized so a block's score matrix stays in
/// cache-friendly territory for thousand-query workloads.
const BLOCK_ROWS: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Metric {
    InnerProduct,
    L2,
}

/// One retrieved (query, reference) candidate. Higher score means more
/// similar for both metrics: L2 reports the negated squared distance.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchCandidate {
    pub query_id: String,
    pub ref_id: String,
    pub score: f64,
}

/// Exact top-k per query by the chosen metric, ties broken by reference id.
///
/// Output lists each query's candidates best-first, queries in input order.
pub fn knn_search(
    queries: &DescriptorSet,
    refs: &DescriptorSet,
    k: usize,
    metric: Metric,
) -> Result<Vec<MatchCandidate>> {
    if queries.dim() != refs.dim() {
        return Err(Error::DimensionMismatch {
            expected: queries.dim(),
            actual: refs.dim(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "must be >= 1".to_string(),
        });
    }
    let k = k.min(refs.count());
    if k == 0 {
        return Ok(Vec::new());
    }

    let q = queries.data();
    let nq = queries.count();
    let query_norms: Vec<f64> = match metric {
        Metric::L2 => q.rows().into_iter().map(|r| r.dot(&r)).collect(),
        Metric::InnerProduct => Vec::new(),
    };

    let block_starts: Vec<usize> = (0..refs.count()).step_by(BLOCK_ROWS).collect();

    // per block: per query, the local top-k as (score, global ref index)
    let per_block: Vec<Vec<Vec<(f64, usize)>>> = block_starts
        .par_iter()
        .map(|&start| {
            let end = (start + BLOCK_ROWS).min(refs.count());
            let block = refs.data().slice(s![start..end, ..]);
            let scores = q.dot(&block.t());
            let mut block_top: Vec<Vec<(f64, usize)>> = Vec::with_capacity(nq);
            for qi in 0..nq {
                let row = scores.index_axis(Axis(0), qi);
                let mut entries: Vec<(f64, usize)> = row
                    .iter()
                    .enumerate()
                    .map(|(local, &dot)| {
                        let global = start + local;
                        let score = match metric {
                            Metric::InnerProduct => dot,
                            Metric::L2 => {
                                let r = refs.row(global);
                                let d2 = (query_norms[qi] - 2.0 * dot + r.dot(&r)).max(0.0);
                                -d2
                            }
                        };
                        (score, global)
                    })
                    .collect();
                sort_candidates(&mut entries, refs.ids());
                entries.truncate(k);
                block_top.push(entries);
            }
            block_top
        })
        .collect();

    let mut out = Vec::with_capacity(nq * k);
    for qi in 0..nq {
        let mut merged: Vec<(f64, usize)> = per_block
            .iter()
            .flat_map(|block| block[qi].iter().copied())
            .collect();
        sort_candidates(&mut merged, refs.ids());
        merged.truncate(k);
        for (score, ri) in merged {
            out.push(MatchCandidate {
                query_id: queries.ids()[qi].clone(),
                ref_id: refs.ids()[ri].clone(),
                score,
            });
        }
    }
    Ok(out)
}

/// Best first: descending score, ascending reference id on exact ties.
fn sort_candidates(entries: &mut [(f64, usize)], ids: &[String]) {
    entries.sort_unstable_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("scores are finite")
            .then_with(|| ids[a.1].cmp(&ids[b.1]))
    });
}
