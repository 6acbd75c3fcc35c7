//! Principal-value spectrum and effective rank of a descriptor set.
//!
//! Dimensional collapse shows up here: an embedding that nominally lives in
//! d dimensions but concentrates its energy in a low-dimensional subspace
//! has an effective rank well below d and a large max/min principal-value
//! ratio.

use ndarray::Axis;

use crate::descriptor::whitening::symmetric_eig_desc;
use crate::descriptor::{DescriptorSet, Vector};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Singular values of the centered data scaled by 1/sqrt(count - 1),
    /// i.e. sqrt of the covariance eigenvalues. Descending.
    pub principal_values: Vector,
    /// exp of the entropy (natural log) of the normalized squared spectrum.
    /// Lands in [1, d] regardless of scale; d means perfectly isotropic.
    pub effective_rank: f64,
    /// Largest / smallest principal value. Infinite for rank-deficient data.
    pub max_min_ratio: f64,
}

pub fn principal_spectrum(x: &DescriptorSet) -> Result<SpectrumReport> {
    let n = x.count();
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "descriptors",
            reason: format!("need at least 2 rows, got {n}"),
        });
    }
    let mean = x.data().mean_axis(Axis(0)).expect("n >= 2");
    let centered = x.data() - &mean.view().insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let (eigenvalues, _) = symmetric_eig_desc(&cov);

    let clamped: Vec<f64> = eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter {
            name: "descriptors",
            reason: "zero covariance: all rows identical".to_string(),
        });
    }

    let entropy: f64 = clamped
        .iter()
        .map(|&l| {
            let q = l / total;
            if q > 0.0 {
                -q * q.ln()
            } else {
                0.0
            }
        })
        .sum();

    let principal_values = Vector::from_vec(clamped.iter().map(|&l| l.sqrt()).collect());
    let smallest = principal_values[principal_values.len() - 1];
    let max_min_ratio = if smallest > 0.0 {
        principal_values[0] / smallest
    } else {
        f64::INFINITY
    };

    Ok(SpectrumReport {
        principal_values,
        effective_rank: entropy.exp(),
        max_min_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::Matrix;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn set_from(data: Matrix) -> DescriptorSet {
        let ids = (0..data.nrows()).map(|i| format!("v{i}")).collect();
        DescriptorSet::new(ids, data).unwrap()
    }

    fn sphere_samples(n: usize, d: usize, seed: u64) -> DescriptorSet {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut data = Array2::<f64>::zeros((n, d));
        for mut row in data.rows_mut() {
            loop {
                for v in row.iter_mut() {
                    *v = normal.sample(&mut rng);
                }
                let norm = row.dot(&row).sqrt();
                if norm > 1e-12 {
                    row.mapv_inplace(|v| v / norm);
                    break;
                }
            }
        }
        set_from(data)
    }

    #[test]
    fn uniform_sphere_has_near_full_effective_rank() {
        let d = 8;
        let set = sphere_samples(10_000, d, 99);
        let report = principal_spectrum(&set).unwrap();
        let rel = (report.effective_rank - d as f64).abs() / d as f64;
        assert!(rel < 0.05, "effective rank {} vs d {}", report.effective_rank, d);
    }

    #[test]
    fn rank_one_data_has_effective_rank_one() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let direction: Vec<f64> = (0..8).map(|_| normal.sample(&mut rng)).collect();
        let mut data = Array2::zeros((100, 8));
        for mut row in data.rows_mut() {
            let t: f64 = normal.sample(&mut rng);
            for (j, v) in row.iter_mut().enumerate() {
                *v = t * direction[j];
            }
        }
        let report = principal_spectrum(&set_from(data)).unwrap();
        assert!((report.effective_rank - 1.0).abs() < 1e-6);
        assert!(report.max_min_ratio.is_infinite());
    }

    #[test]
    fn diag_4_1_covariance_gives_principal_values_2_1() {
        // rows (+-a, 0) x2 and (0, +-b) x2 have mean zero and sample
        // covariance diag(4a^2/7, 4b^2/7); pick a, b so that lands on
        // diag(4, 1) exactly
        let a = (7.0f64).sqrt();
        let b = (7.0f64 / 4.0).sqrt();
        let rows = [
            [a, 0.0],
            [-a, 0.0],
            [a, 0.0],
            [-a, 0.0],
            [0.0, b],
            [0.0, -b],
            [0.0, b],
            [0.0, -b],
        ];
        let mut data = Array2::zeros((8, 2));
        for (i, r) in rows.iter().enumerate() {
            data[[i, 0]] = r[0];
            data[[i, 1]] = r[1];
        }
        let report = principal_spectrum(&set_from(data)).unwrap();
        assert!((report.principal_values[0] - 2.0).abs() < 1e-12);
        assert!((report.principal_values[1] - 1.0).abs() < 1e-12);
        assert!((report.max_min_ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invariant_under_permutation_and_rotation() {
        let set = sphere_samples(256, 6, 5);
        let base = principal_spectrum(&set).unwrap();

        // permutation of rows
        let mut idx: Vec<usize> = (0..set.count()).collect();
        idx.reverse();
        let permuted = set.select(&idx).unwrap();
        let p = principal_spectrum(&permuted).unwrap();
        assert!((p.effective_rank - base.effective_rank).abs() < 1e-8);

        // orthogonal rotation (Householder: I - 2vv^T)
        let mut v = Vector::zeros(6);
        v[0] = 1.0;
        v[3] = 2.0;
        v[5] = -1.0;
        let v = crate::descriptor::l2_normalize(&v).unwrap();
        let mut q = Array2::eye(6);
        for i in 0..6 {
            for j in 0..6 {
                q[[i, j]] -= 2.0 * v[i] * v[j];
            }
        }
        let rotated = set_from(set.data().dot(&q));
        let r = principal_spectrum(&rotated).unwrap();
        assert!((r.effective_rank - base.effective_rank).abs() < 1e-8);
        for (a, b) in r
            .principal_values
            .iter()
            .zip(base.principal_values.iter())
        {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn fewer_than_two_rows_rejected() {
        let set = set_from(Array2::zeros((1, 4)) + 1.0);
        assert!(principal_spectrum(&set).is_err());
    }
}
