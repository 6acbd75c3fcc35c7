//! Per-location match heatmaps.
//!
//! Dropping the pooling step leaves one descriptor per activation-map cell;
//! comparing each against a global descriptor shows which regions of an
//! image drive a match. Grid descriptors are expected to have passed through
//! the same projection and L2 normalization as global descriptors.

use ndarray::Array2;

use crate::descriptor::set::NORM_TOL;
use crate::descriptor::{DescriptorSet, Matrix, Vector};
use crate::error::{Error, Result};

/// Cosine similarity of every grid-cell descriptor (row-major H x W set)
/// against a global unit descriptor. Output is an H x W matrix in [-1, 1].
pub fn match_heatmap(
    grid: &DescriptorSet,
    height: usize,
    width: usize,
    global: &Vector,
) -> Result<Matrix> {
    if grid.count() != height * width {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!(
                "expected {height}x{width} = {} cells, got {}",
                height * width,
                grid.count()
            ),
        });
    }
    if grid.dim() != global.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            actual: global.len(),
        });
    }
    let gnorm = global.dot(global).sqrt();
    if (gnorm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { row: 0, norm: gnorm });
    }
    if !grid.is_normalized() {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "grid descriptors must be L2-normalized".to_string(),
        });
    }

    let sims = grid.data().dot(global);
    let mut out = Array2::zeros((height, width));
    for (cell, &s) in sims.iter().enumerate() {
        out[[cell / width, cell % width]] = s.clamp(-1.0, 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn unit(v: Vec<f64>) -> Vector {
        crate::descriptor::l2_normalize(&Vector::from_vec(v)).unwrap()
    }

    #[test]
    fn identical_cells_give_all_ones() {
        let g = unit(vec![0.5, -1.0, 2.0]);
        let mut data = Array2::zeros((4, 3));
        for mut row in data.rows_mut() {
            row.assign(&g);
        }
        let ids = (0..4).map(|i| format!("c{i}")).collect();
        let grid = DescriptorSet::new_normalized(ids, data).unwrap();
        let hm = match_heatmap(&grid, 2, 2, &g).unwrap();
        assert!(hm.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_matching_cell_peaks_alone() {
        let g = unit(vec![1.0, 0.0, 0.0]);
        let rows = [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
        ];
        let mut data = Array2::zeros((4, 3));
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                data[[i, j]] = v;
            }
        }
        let ids = (0..4).map(|i| format!("c{i}")).collect();
        let grid = DescriptorSet::new_normalized(ids, data).unwrap();
        let hm = match_heatmap(&grid, 2, 2, &g).unwrap();
        assert_eq!(hm[[1, 0]], 1.0);
        assert_eq!(hm[[0, 0]], 0.0);
        assert_eq!(hm[[0, 1]], 0.0);
        assert_eq!(hm[[1, 1]], 0.0);
    }

    #[test]
    fn random_cells_concentrate_near_zero_in_high_dim() {
        // concentration of measure: random unit vectors in R^512 are nearly
        // orthogonal, so >= 99% of 400 cells land within |sim| < 0.2
        let d = 512;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let sample = |rng: &mut rand_chacha::ChaCha12Rng| {
            let v: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
            unit(v)
        };
        let g = sample(&mut rng);
        let mut data = Array2::zeros((400, d));
        for mut row in data.rows_mut() {
            row.assign(&sample(&mut rng));
        }
        let ids = (0..400).map(|i| format!("c{i}")).collect();
        let grid = DescriptorSet::new_normalized(ids, data).unwrap();
        let hm = match_heatmap(&grid, 20, 20, &g).unwrap();
        let near_zero = hm.iter().filter(|v| v.abs() < 0.2).count();
        assert!(near_zero >= 396, "only {near_zero}/400 cells near zero");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = unit(vec![1.0, 0.0]);
        let data = Array2::from_elem((1, 3), 1.0 / (3.0f64).sqrt());
        let grid = DescriptorSet::new_normalized(vec!["c0".into()], data).unwrap();
        assert!(matches!(
            match_heatmap(&grid, 1, 1, &g),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
