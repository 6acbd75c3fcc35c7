//! Background-set similarity normalization: per-query bias, rescoring,
//! the integrated-bias descriptor identity, and the parameter sweep.
//!
//!     cargo run --release --example score_normalization

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use sscd::descriptor::DescriptorSet;
use sscd::eval::{knn_search, micro_ap, GroundTruth, Metric};
use sscd::scorenorm::{
    apply_bias_to_candidates, background_biases, extend_references, integrate_bias,
    score_normalization_sweep, ScoreNormConfig,
};

fn unit_set(prefix: &str, n: usize, d: usize, rng: &mut ChaCha12Rng) -> DescriptorSet {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let data = Array2::from_shape_fn((n, d), |_| normal.sample(rng));
    DescriptorSet::new((0..n).map(|i| format!("{prefix}{i:04}")).collect(), data)
        .unwrap()
        .l2_normalized()
        .unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let d = 24;
    let refs = unit_set("r", 600, d, &mut rng);
    let background = unit_set("b", 800, d, &mut rng);

    // queries: noisy copies of the first 100 references
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut qdata = Array2::zeros((100, d));
    for i in 0..100 {
        for j in 0..d {
            qdata[[i, j]] = refs.data()[[i, j]] + 0.5 * normal.sample(&mut rng);
        }
    }
    let queries = DescriptorSet::new((0..100).map(|i| format!("q{i:04}")).collect(), qdata)?
        .l2_normalized()?;
    let gt = GroundTruth::new((0..100).map(|i| (format!("q{i:04}"), format!("r{i:04}"))));

    let cfg = ScoreNormConfig::default();
    let biases = background_biases(&queries, &background, &cfg)?;
    println!(
        "bias over {} queries: min {:.4}, max {:.4} (n={}, n_end={}, beta={})",
        biases.len(),
        biases.iter().cloned().fold(f64::INFINITY, f64::min),
        biases.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        cfg.n,
        cfg.n_end,
        cfg.beta
    );

    let raw = knn_search(&queries, &refs, 10, Metric::InnerProduct)?;
    let rescored = apply_bias_to_candidates(&raw, queries.ids(), &biases)?;
    let (uap_raw, _) = micro_ap(&raw, &gt);
    let (uap_norm, _) = micro_ap(&rescored, &gt);
    println!("micro_ap raw {uap_raw:.4} -> normalized {uap_norm:.4}");

    // the integrated-bias descriptors turn normalized similarity back into
    // a plain dot product, exactly
    let biased_queries = integrate_bias(&queries, &biases)?;
    let extended_refs = extend_references(&refs)?;
    let q0 = biased_queries.set().row(0);
    let r0 = extended_refs.set().row(0);
    let direct = queries.row(0).dot(&refs.row(0)) - biases[0];
    println!(
        "integrated-bias identity: augmented dot {:.12} vs two-step {:.12}",
        q0.dot(&r0),
        direct
    );

    println!("\nparameter sweep (n, n_end, beta -> micro_ap), best 5 cells:");
    let cells = score_normalization_sweep(
        &queries,
        &refs,
        &background,
        &gt,
        10,
        5,
        &[0.5, 0.75, 1.0, 1.25, 1.5],
    )?;
    let mut ranked = cells.clone();
    ranked.sort_by(|a, b| b.micro_ap.partial_cmp(&a.micro_ap).unwrap());
    for c in ranked.iter().take(5) {
        println!(
            "  n={} n_end={} beta={:<4} micro_ap {:.4}",
            c.n, c.n_end, c.beta, c.micro_ap
        );
    }
    println!("  ({} cells evaluated)", cells.len());
    Ok(())
}
