//! Exact retrieval and the evaluation metric suite.

mod histogram;
mod knn;
mod metrics;

pub use histogram::{distance_histograms, Histogram, HISTOGRAM_RANGE};
pub use knn::{knn_search, MatchCandidate, Metric};
pub use metrics::{mean_ap, micro_ap, mrr, recall_at_1, EvalReport, GroundTruth, PrPoint};
