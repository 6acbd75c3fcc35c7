//! Fit PCA whitening on a background set, apply it, and check the output
//! covariance; then sweep candidate output dimensions the way the baseline
//! postprocessing protocol does.
//!
//!     cargo run --release --example whitening

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sscd::descriptor::{fit_whitening, whitening_dimension_sweep, DescriptorSet};

/// Correlated Gaussian data: anisotropic scales plus a shear.
fn background(n: usize, d: usize, seed: u64) -> DescriptorSet {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut data = Array2::zeros((n, d));
    for mut row in data.rows_mut() {
        let mut prev = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            let scale = 0.3 + 2.0 * (j as f64 / d as f64);
            let fresh: f64 = rng.random_range(-1.0..1.0);
            *v = scale * fresh + 0.5 * prev;
            prev = *v;
        }
    }
    let ids = (0..n).map(|i| format!("bg-{i}")).collect();
    DescriptorSet::new(ids, data).unwrap()
}

fn covariance_diagnostics(set: &DescriptorSet) -> (f64, f64) {
    let mean = set.data().mean_axis(Axis(0)).unwrap();
    let centered = set.data() - &mean.insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / (set.count() as f64 - 1.0);
    let d = set.dim();
    let mut on_diag: f64 = 0.0;
    let mut off_diag: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                on_diag += (cov[[i, j]] - 1.0).powi(2);
            } else {
                off_diag += cov[[i, j]].powi(2);
            }
        }
    }
    (on_diag.sqrt(), off_diag.sqrt())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 16;
    let fit_set = background(20_000, d, 1);
    let apply_set = background(5_000, d, 2);

    let transform = fit_whitening(&fit_set, d, 1e-6)?;
    println!(
        "eigenvalue range of the background covariance: {:.4} .. {:.4}",
        transform.eigenvalues()[d - 1],
        transform.eigenvalues()[0]
    );

    let whitened = transform.apply(&apply_set, false)?;
    let (diag_err, off_err) = covariance_diagnostics(&whitened);
    println!("whitened covariance: |diag - 1| = {diag_err:.3}, |off-diag| = {off_err:.3}");

    let renorm = transform.apply(&apply_set, true)?;
    println!(
        "with renormalization every row is unit: {}",
        renorm
            .data()
            .rows()
            .into_iter()
            .all(|r| (r.dot(&r).sqrt() - 1.0).abs() < 1e-9)
    );

    println!("\nbaseline-protocol dimension sweep (choose by downstream metric):");
    for dim in whitening_dimension_sweep(d) {
        let t = fit_whitening(&fit_set, dim, 1e-6)?;
        let out = t.apply_protocol(&apply_set, true, true)?;
        println!(
            "  dim {dim:>3}: kept eigenvalue mass {:.3}",
            t.eigenvalues().iter().take(dim).sum::<f64>()
                / t.eigenvalues().iter().sum::<f64>().max(f64::MIN_POSITIVE)
        );
        let _ = out;
    }
    Ok(())
}
