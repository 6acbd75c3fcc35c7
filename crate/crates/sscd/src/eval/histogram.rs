//! Positive / negative squared-distance histograms.
//!
//! The separation picture behind a retrieval run: squared distances of true
//! copy pairs against each query's nearest NON-matching reference. Unit
//! descriptors keep every squared distance inside [0, 4], so bins are fixed
//! over that range and histograms from different runs line up.

use serde::{Deserialize, Serialize};

use super::metrics::GroundTruth;
use crate::descriptor::DescriptorSet;
use crate::error::{Error, Result};

/// Squared L2 distances between unit vectors live in [0, 4].
pub const HISTOGRAM_RANGE: (f64, f64) = (0.0, 4.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// bins + 1 edges spanning `HISTOGRAM_RANGE`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn new(bins: usize) -> Self {
        let (lo, hi) = HISTOGRAM_RANGE;
        let step = (hi - lo) / bins as f64;
        Self {
            edges: (0..=bins).map(|i| lo + step * i as f64).collect(),
            counts: vec![0; bins],
        }
    }

    fn add(&mut self, value: f64) {
        let (lo, hi) = HISTOGRAM_RANGE;
        let bins = self.counts.len();
        let clamped = value.clamp(lo, hi);
        let mut bin = ((clamped - lo) / (hi - lo) * bins as f64) as usize;
        if bin >= bins {
            bin = bins - 1;
        }
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Build the positive histogram over ground-truth pair squared distances and
/// the negative histogram over each query's nearest non-matching reference
/// squared distance. Descriptors must be unit-normalized.
pub fn distance_histograms(
    queries: &DescriptorSet,
    refs: &DescriptorSet,
    gt: &GroundTruth,
    bins: usize,
) -> Result<(Histogram, Histogram)> {
    if queries.dim() != refs.dim() {
        return Err(Error::DimensionMismatch {
            expected: queries.dim(),
            actual: refs.dim(),
        });
    }
    if bins == 0 {
        return Err(Error::InvalidParameter {
            name: "bins",
            reason: "must be >= 1".to_string(),
        });
    }
    if !queries.is_normalized() || !refs.is_normalized() {
        return Err(Error::InvalidParameter {
            name: "descriptors",
            reason: "distance histograms require unit-normalized sets".to_string(),
        });
    }

    let mut positive = Histogram::new(bins);
    let mut negative = Histogram::new(bins);

    // all pairwise dots; probe-scale sets, so one product is fine
    let dots = queries.data().dot(&refs.data().t());

    for (qi, qid) in queries.ids().iter().enumerate() {
        let mut best_neg: Option<f64> = None;
        for (ri, rid) in refs.ids().iter().enumerate() {
            let d2 = (2.0 - 2.0 * dots[[qi, ri]]).max(0.0);
            if gt.contains(qid, rid) {
                positive.add(d2);
            } else if best_neg.is_none_or(|b| d2 < b) {
                best_neg = Some(d2);
            }
        }
        if let Some(d2) = best_neg {
            negative.add(d2);
        }
    }
    Ok((positive, negative))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn axis_set(prefix: &str, n: usize, d: usize) -> DescriptorSet {
        let mut data = Array2::zeros((n, d));
        for i in 0..n {
            data[[i, i % d]] = 1.0;
        }
        let ids = (0..n).map(|i| format!("{prefix}{i}")).collect();
        DescriptorSet::new_normalized(ids, data).unwrap()
    }

    #[test]
    fn identical_pairs_land_in_zero_bin() {
        let queries = axis_set("q", 3, 4);
        let mut refs_data = Array2::zeros((3, 4));
        for i in 0..3 {
            refs_data[[i, i]] = 1.0;
        }
        let refs = DescriptorSet::new_normalized(
            (0..3).map(|i| format!("r{i}")).collect(),
            refs_data,
        )
        .unwrap();
        let gt = GroundTruth::new((0..3).map(|i| (format!("q{i}"), format!("r{i}"))));
        let (pos, neg) = distance_histograms(&queries, &refs, &gt, 8).unwrap();
        assert_eq!(pos.counts[0], 3);
        assert_eq!(pos.total(), 3);
        assert_eq!(neg.total(), 3);
    }

    #[test]
    fn orthogonal_vectors_fill_single_bin_at_two() {
        // queries on axis 0..2, refs on axes 3..5: all distances are exactly 2
        let mut qdata = Array2::zeros((3, 6));
        let mut rdata = Array2::zeros((3, 6));
        for i in 0..3 {
            qdata[[i, i]] = 1.0;
            rdata[[i, i + 3]] = 1.0;
        }
        let queries = DescriptorSet::new_normalized(
            (0..3).map(|i| format!("q{i}")).collect(),
            qdata,
        )
        .unwrap();
        let refs = DescriptorSet::new_normalized(
            (0..3).map(|i| format!("r{i}")).collect(),
            rdata,
        )
        .unwrap();
        let gt = GroundTruth::new((0..3).map(|i| (format!("q{i}"), format!("r{i}"))));
        let (pos, neg) = distance_histograms(&queries, &refs, &gt, 4).unwrap();
        // d^2 = 2 falls in bin [2, 3)
        assert_eq!(pos.counts[2], 3);
        assert_eq!(neg.counts[2], 3);
    }

    #[test]
    fn totals_count_pairs_and_queries() {
        let queries = axis_set("q", 5, 8);
        let refs = axis_set("r", 7, 8);
        let gt = GroundTruth::new(vec![
            ("q0".to_string(), "r0".to_string()),
            ("q0".to_string(), "r1".to_string()),
            ("q1".to_string(), "r2".to_string()),
        ]);
        let (pos, neg) = distance_histograms(&queries, &refs, &gt, 16).unwrap();
        assert_eq!(pos.total(), 3);
        assert_eq!(neg.total(), 5);
    }
}
