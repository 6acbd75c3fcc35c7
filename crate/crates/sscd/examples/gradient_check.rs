//! Verify every analytic gradient against central finite differences:
//! the contrastive loss, the entropy regularizer, the mix-aware variant,
//! their combination, and the full encoder composition.
//!
//!     cargo run --release --example gradient_check

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sscd::descriptor::Matrix;
use sscd::loss::{
    combined_loss, combined_value, infonce, infonce_mix, infonce_mix_value, infonce_value,
    koleo, koleo_value, BatchStructure, LossConfig,
};
use sscd::toy::{gradient_check, Encoder, EncoderKind};

fn random_unit_rows(n: usize, d: usize, rng: &mut ChaCha12Rng) -> Matrix {
    let mut z = Array2::<f64>::zeros((n, d));
    for mut row in z.rows_mut() {
        for v in row.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let norm = row.dot(&row).sqrt();
        row.mapv_inplace(|v| v / norm);
    }
    z
}

fn flat(m: &Matrix) -> Vec<f64> {
    m.iter().copied().collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let n = 6;
    let d = 8;
    let tau = 0.05;
    let z = random_unit_rows(2 * n, d, &mut rng);
    let batch = BatchStructure::repeated_pairs(n);
    let shape = (2 * n, d);
    let reshape = move |p: &[f64]| Array2::from_shape_vec(shape, p.to_vec()).expect("shape");

    println!("loss            max_rel_err  checked  excluded");
    let cases: Vec<(&str, Vec<f64>, Box<dyn FnMut(&[f64]) -> sscd::Result<f64>>)> = vec![
        (
            "infonce",
            flat(&infonce(&z, &batch, tau)?.grad),
            Box::new({
                let batch = batch.clone();
                move |p: &[f64]| infonce_value(&reshape(p), &batch, tau)
            }),
        ),
        (
            "koleo",
            flat(&koleo(&z, &batch)?.grad),
            Box::new({
                let batch = batch.clone();
                move |p: &[f64]| koleo_value(&reshape(p), &batch)
            }),
        ),
        (
            "infonce_mix",
            flat(&infonce_mix(&z, &batch, tau)?.grad),
            Box::new({
                let batch = batch.clone();
                move |p: &[f64]| infonce_mix_value(&reshape(p), &batch, tau)
            }),
        ),
        (
            "combined",
            flat(&combined_loss(&z, &batch, &LossConfig::default())?.grad),
            Box::new({
                let batch = batch.clone();
                move |p: &[f64]| combined_value(&reshape(p), &batch, &LossConfig::default())
            }),
        ),
    ];
    for (name, analytic, mut value_fn) in cases {
        let report = gradient_check(&mut value_fn, &flat(&z), &analytic, 1e-5, 1e-4, 3)?;
        println!(
            "{name:<15} {:>11.3e}  {:>7}  {:>8}",
            report.max_rel_error, report.checked, report.excluded
        );
        assert!(report.passed());
    }

    // full composition: inputs -> encoder -> normalize -> combined loss
    let enc = Encoder::new(EncoderKind::Mlp { hidden: 10 }, 12, d, 99);
    let x = Array2::from_shape_fn((2 * n, 12), |_| rng.random_range(-1.0..1.0));
    let config = LossConfig::default();
    let (zf, cache) = enc.forward(&x)?;
    let loss = combined_loss(&zf, &batch, &config)?;
    let analytic = enc.grads_to_flat(&enc.backward(&cache, &loss.grad));
    let report = gradient_check(
        |p: &[f64]| {
            let mut probe = enc.clone();
            probe.set_flat(p)?;
            let (z, _) = probe.forward(&x)?;
            combined_value(&z, &batch, &config)
        },
        &enc.to_flat(),
        &analytic,
        1e-5,
        1e-4,
        4,
    )?;
    println!(
        "{:<15} {:>11.3e}  {:>7}  {:>8}",
        "encoder+loss", report.max_rel_error, report.checked, report.excluded
    );
    assert!(report.passed());
    println!("\nall gradients match finite differences");
    Ok(())
}
