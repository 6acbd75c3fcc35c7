//! Reduce maximum-inner-product search over non-normalized (integrated-bias)
//! descriptors to plain L2 nearest-neighbor search.
//!
//!     cargo run --release --example mips_reduction

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sscd::descriptor::DescriptorSet;
use sscd::eval::{knn_search, Metric};
use sscd::scorenorm::mips_to_l2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let d = 16;
    let n = 500;

    // references with wildly varying norms, the regime where inner-product
    // and L2 rankings genuinely disagree
    let data = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
        * Array2::from_shape_fn((n, 1), |_| rng.random_range(0.2..3.0));
    let refs = DescriptorSet::new((0..n).map(|i| format!("r{i:04}")).collect(), data)?;

    let qdata = Array2::from_shape_fn((50, d), |_| rng.random_range(-1.0..1.0));
    let queries = DescriptorSet::new((0..50).map(|i| format!("q{i:02}")).collect(), qdata)?;

    // direct max-inner-product search
    let by_dot = knn_search(&queries, &refs, 5, Metric::InnerProduct)?;

    // reduced search: one extra coordinate on each side, then L2
    let reduced = mips_to_l2(&refs)?;
    println!(
        "augmented all {} references to constant norm {:.4}",
        n,
        reduced.max_norm()
    );
    let aug_queries = reduced.augment_queries(&queries)?;
    let by_l2 = knn_search(&aug_queries, reduced.references(), 5, Metric::L2)?;

    let agree = by_dot
        .iter()
        .zip(&by_l2)
        .all(|(a, b)| a.query_id == b.query_id && a.ref_id == b.ref_id);
    println!("top-5 rankings identical under the reduction: {agree}");

    println!("\nquery q00 under both searches:");
    for (a, b) in by_dot.iter().zip(&by_l2).take(5) {
        println!(
            "  dot: {} {:>8.4}   l2: {} {:>8.4}",
            a.ref_id, a.score, b.ref_id, b.score
        );
    }
    Ok(())
}
