//! Exact k-NN retrieval plus the metric suite: micro/mean average
//! precision, recall@1, MRR, and the PR curve.
//!
//!     cargo run --release --example retrieval_metrics

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use sscd::descriptor::DescriptorSet;
use sscd::eval::{knn_search, EvalReport, GroundTruth, Metric};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let d = 32;
    let n_refs = 2_000;
    let n_queries = 300;

    // references on the unit sphere
    let refs_data = Array2::from_shape_fn((n_refs, d), |_| normal.sample(&mut rng));
    let refs = DescriptorSet::new(
        (0..n_refs).map(|i| format!("r{i:05}")).collect(),
        refs_data,
    )?
    .l2_normalized()?;

    // queries: noisy copies of the first n_queries references
    let mut queries_data = Array2::zeros((n_queries, d));
    for i in 0..n_queries {
        for j in 0..d {
            queries_data[[i, j]] = refs.data()[[i, j]] + 0.35 * normal.sample(&mut rng);
        }
    }
    let queries = DescriptorSet::new(
        (0..n_queries).map(|i| format!("q{i:05}")).collect(),
        queries_data,
    )?
    .l2_normalized()?;

    let gt = GroundTruth::new((0..n_queries).map(|i| (format!("q{i:05}"), format!("r{i:05}"))));

    let candidates = knn_search(&queries, &refs, 10, Metric::InnerProduct)?;
    println!(
        "searched {} queries against {} references, top-10 each",
        n_queries, n_refs
    );

    let report = EvalReport::from_candidates(&candidates, &gt);
    println!("micro_ap    {:.4}", report.micro_ap);
    println!("mean_ap     {:.4}", report.mean_ap);
    println!("recall_at_1 {:.4}", report.recall_at_1);
    println!("mrr         {:.4}", report.mrr);

    println!("\nPR curve (every 20th threshold):");
    for p in report.pr_points.iter().step_by(20) {
        println!("  recall {:.3}  precision {:.3}", p.recall, p.precision);
    }

    // inner product and L2 agree on unit vectors
    let l2 = knn_search(&queries, &refs, 10, Metric::L2)?;
    let same_ranking = candidates
        .iter()
        .zip(&l2)
        .all(|(a, b)| a.query_id == b.query_id && a.ref_id == b.ref_id);
    println!("\nip and l2 rankings agree on the sphere: {same_ranking}");
    Ok(())
}
