//! PCA whitening learned from a background descriptor set.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis};

use crate::descriptor::{DescriptorSet, Matrix, Vector};
use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which a direction counts as
/// numerically rank-deficient.
const RANK_TOL: f64 = 1e-10;

/// Affine transform centering by a background mean and projecting onto the
/// top principal directions scaled to unit variance.
#[derive(Debug, Clone)]
pub struct WhiteningTransform {
    mean: Vector,
    /// d_in x d_out; column j is the j-th eigenvector / sqrt(eigenvalue + epsilon).
    projection: Matrix,
    /// All d_in covariance eigenvalues, descending.
    eigenvalues: Vector,
    epsilon: f64,
}

impl WhiteningTransform {
    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn projection(&self) -> &Matrix {
        &self.projection
    }

    pub fn eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn input_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.ncols()
    }

    /// Map rows to `(row - mean) . projection`, optionally renormalizing.
    pub fn apply(&self, x: &DescriptorSet, renormalize: bool) -> Result<DescriptorSet> {
        self.apply_protocol(x, false, renormalize)
    }

    /// Full postprocessing protocol. `normalize_before` additionally
    /// L2-normalizes inputs ahead of the projection (the trunk-feature
    /// baseline protocol: normalize both before and after whitening).
    pub fn apply_protocol(
        &self,
        x: &DescriptorSet,
        normalize_before: bool,
        renormalize: bool,
    ) -> Result<DescriptorSet> {
        if x.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.dim(),
            });
        }
        let source;
        let input = if normalize_before {
            source = x.l2_normalized()?;
            source.data()
        } else {
            x.data()
        };
        let centered = input - &self.mean.view().insert_axis(Axis(0));
        let mut out = centered.dot(&self.projection);
        if renormalize {
            for mut row in out.rows_mut() {
                let norm = row.dot(&row).sqrt();
                if !(norm > 0.0) {
                    return Err(Error::ZeroVector);
                }
                row.mapv_inplace(|v| v / norm);
            }
        }
        DescriptorSet::with_flag(x.ids().to_vec(), out, renormalize, crate::descriptor::set::NORM_TOL)
    }
}

/// Fit PCA whitening on a background set.
///
/// Eigendecomposition of the sample covariance; the top `out_dim`
/// eigenvectors are scaled by `1/sqrt(eigenvalue + epsilon)`. Errors when
/// `out_dim` exceeds the numerical rank of the covariance, naming the
/// observed rank (near-rank-deficient background sets are a known failure
/// mode of whitening at full descriptor size).
pub fn fit_whitening(
    background: &DescriptorSet,
    out_dim: usize,
    epsilon: f64,
) -> Result<WhiteningTransform> {
    let n = background.count();
    let d = background.dim();
    if out_dim == 0 || out_dim > d {
        return Err(Error::InvalidParameter {
            name: "out_dim",
            reason: format!("must be in 1..={d}, got {out_dim}"),
        });
    }
    if n < out_dim + 1 {
        return Err(Error::InvalidParameter {
            name: "background",
            reason: format!("need at least out_dim + 1 = {} rows, got {n}", out_dim + 1),
        });
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be a small positive real, got {epsilon}"),
        });
    }

    let mean = background
        .data()
        .mean_axis(Axis(0))
        .expect("count >= 2 checked above");
    let centered = background.data() - &mean.view().insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);

    let (eigenvalues, eigenvectors) = symmetric_eig_desc(&cov);

    let max_eig = eigenvalues[0].max(0.0);
    let rank = eigenvalues
        .iter()
        .filter(|&&l| l > max_eig * RANK_TOL && l > 0.0)
        .count();
    if out_dim > rank {
        return Err(Error::RankDeficient {
            rank,
            requested: out_dim,
        });
    }

    let mut projection = Array2::zeros((d, out_dim));
    for j in 0..out_dim {
        let scale = 1.0 / (eigenvalues[j] + epsilon).sqrt();
        for i in 0..d {
            projection[[i, j]] = eigenvectors[[i, j]] * scale;
        }
    }

    Ok(WhiteningTransform {
        mean,
        projection,
        eigenvalues,
        epsilon,
    })
}

/// Candidate output dimensions for the baseline whitening sweep:
/// `{d, 3/4 d, d/2, d/4, d/8, ...}` down to 1, deduplicated.
pub fn whitening_dimension_sweep(d: usize) -> Vec<usize> {
    let mut dims = vec![d, d * 3 / 4];
    let mut cur = d / 2;
    while cur >= 1 {
        dims.push(cur);
        cur /= 2;
    }
    dims.retain(|&x| x >= 1);
    dims.sort_unstable_by(|a, b| b.cmp(a));
    dims.dedup();
    dims
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending,
/// eigenvector signs canonicalized (largest-magnitude component positive).
pub(crate) fn symmetric_eig_desc(m: &Matrix) -> (Vector, Matrix) {
    let d = m.nrows();
    let dm = DMatrix::from_fn(d, d, |i, j| m[[i, j]]);
    let eig = dm.symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });

    let mut values = Array1::zeros(d);
    let mut vectors = Array2::zeros((d, d));
    for (out, &src) in order.iter().enumerate() {
        values[out] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        // canonical sign: component of largest magnitude is positive
        let mut pivot = 0;
        for i in 1..d {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            vectors[[i, out]] = col[i] * sign;
        }
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn gaussian_set(n: usize, d: usize, scales: &[f64], seed: u64) -> DescriptorSet {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut data = Array2::zeros((n, d));
        for i in 0..n {
            for j in 0..d {
                data[[i, j]] = normal.sample(&mut rng) * scales[j];
            }
        }
        let ids = (0..n).map(|i| format!("v{i}")).collect();
        DescriptorSet::new(ids, data).unwrap()
    }

    #[test]
    fn isotropic_background_whitens_to_identity_covariance() {
        let d = 6;
        let set = gaussian_set(10_000, d, &[1.0; 6], 7);
        let t = fit_whitening(&set, d, 1e-6).unwrap();
        let out = t.apply(&set, false).unwrap();
        let mean = out.data().mean_axis(Axis(0)).unwrap();
        let centered = out.data() - &mean.view().insert_axis(Axis(0));
        let cov = centered.t().dot(&centered) / (out.count() as f64 - 1.0);
        let mut frob = 0.0;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                frob += (cov[[i, j]] - target).powi(2);
            }
        }
        assert!(frob.sqrt() < 0.1, "covariance far from identity: {}", frob.sqrt());
    }

    #[test]
    fn identical_rows_report_rank_zero() {
        let data = Array2::from_elem((10, 3), 0.5);
        let ids = (0..10).map(|i| format!("v{i}")).collect();
        let set = DescriptorSet::new(ids, data).unwrap();
        let err = fit_whitening(&set, 1, 1e-6).unwrap_err();
        assert!(err.to_string().contains("rank 0"), "got: {err}");
    }

    #[test]
    fn diagonal_covariance_selects_leading_axis() {
        // covariance ~ diag(4, 1): first axis dominates
        let set = gaussian_set(50_000, 2, &[2.0, 1.0], 11);
        let t = fit_whitening(&set, 1, 1e-9).unwrap();
        // projection column should be (close to) +/- e1 scaled by 1/2
        let p = t.projection();
        assert!(p[[0, 0]].abs() > 10.0 * p[[1, 0]].abs(), "projection {p:?}");
        let out = t.apply(&set, false).unwrap();
        let var = out.data().column(0).mapv(|v| v * v).mean().unwrap();
        assert!((var - 1.0).abs() < 0.05, "whitened variance {var}");
    }

    #[test]
    fn identity_transform_is_identity() {
        let t = WhiteningTransform {
            mean: Vector::zeros(2),
            projection: arr2(&[[1.0, 0.0], [0.0, 1.0]]),
            eigenvalues: Vector::ones(2),
            epsilon: 1e-6,
        };
        let x = DescriptorSet::new(
            vec!["a".into(), "b".into()],
            arr2(&[[0.3, -0.4], [1.0, 2.0]]),
        )
        .unwrap();
        let out = t.apply(&x, false).unwrap();
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn renormalize_yields_unit_rows() {
        let set = gaussian_set(500, 4, &[1.0, 2.0, 0.5, 1.5], 3);
        let t = fit_whitening(&set, 4, 1e-6).unwrap();
        let out = t.apply(&set, true).unwrap();
        assert!(out.is_normalized());
        for row in out.data().rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn row_at_mean_errors_on_renormalize() {
        let set = gaussian_set(200, 3, &[1.0, 1.0, 1.0], 5);
        let t = fit_whitening(&set, 3, 1e-6).unwrap();
        let mean = t.mean().clone();
        let mut data = Array2::zeros((1, 3));
        data.row_mut(0).assign(&mean);
        let x = DescriptorSet::new(vec!["m".into()], data).unwrap();
        assert!(matches!(t.apply(&x, true), Err(Error::ZeroVector)));
        // without renormalization the zero row is fine
        let out = t.apply(&x, false).unwrap();
        assert!(out.data().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn whitening_is_affine_before_renormalization() {
        let set = gaussian_set(1000, 3, &[1.0, 2.0, 3.0], 13);
        let t = fit_whitening(&set, 3, 1e-6).unwrap();
        let x = gaussian_set(4, 3, &[1.0, 1.0, 1.0], 17);
        let y = gaussian_set(4, 3, &[2.0, 1.0, 0.5], 19);
        let alpha = 0.3;
        let blend_data = x.data() * alpha + y.data() * (1.0 - alpha);
        let blend = DescriptorSet::new(x.ids().to_vec(), blend_data).unwrap();
        let tx = t.apply(&x, false).unwrap();
        let ty = t.apply(&y, false).unwrap();
        let tb = t.apply(&blend, false).unwrap();
        let expect = tx.data() * alpha + ty.data() * (1.0 - alpha);
        for (a, b) in tb.data().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sweep_dims_follow_halving_pattern() {
        assert_eq!(whitening_dimension_sweep(512), vec![512, 384, 256, 128, 64, 32, 16, 8, 4, 2, 1]);
        assert_eq!(whitening_dimension_sweep(4), vec![4, 3, 2, 1]);
    }
}
