//! Synthetic sources: the benchmark's stand-in for images.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::descriptor::Vector;
use crate::error::{Error, Result};

/// One source: an id and a vector in input space.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySource {
    pub id: String,
    pub vector: Vector,
}

/// Draw `count` sources from an isotropic standard normal. Deterministic
/// given the seed.
pub fn generate_sources(count: usize, dim: usize, seed: u64) -> Result<Vec<ToySource>> {
    if count < 2 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: format!("need at least 2 sources, got {count}"),
        });
    }
    if dim == 0 {
        return Err(Error::InvalidParameter {
            name: "dim",
            reason: "input dimension must be >= 1".to_string(),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    Ok((0..count)
        .map(|i| ToySource {
            id: format!("src-{i:05}"),
            vector: Vector::from_iter((0..dim).map(|_| normal.sample(&mut rng))),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let a = generate_sources(10, 8, 123).unwrap();
        let b = generate_sources(10, 8, 123).unwrap();
        assert_eq!(a, b);
        let c = generate_sources(10, 8, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn two_sources_are_distinct() {
        let s = generate_sources(2, 2, 7).unwrap();
        assert_ne!(s[0].vector, s[1].vector);
        assert_ne!(s[0].id, s[1].id);
    }

    #[test]
    fn high_dim_sources_nearly_orthogonal() {
        let s = generate_sources(1000, 64, 5).unwrap();
        let mut sum_abs_cos = 0.0;
        let mut count = 0u64;
        // sample of pairs keeps this cheap
        for i in (0..1000).step_by(7) {
            for j in (i + 1..1000).step_by(13) {
                let a = &s[i].vector;
                let b = &s[j].vector;
                let cos = a.dot(b) / (a.dot(a).sqrt() * b.dot(b).sqrt());
                sum_abs_cos += cos.abs();
                count += 1;
            }
        }
        let mean = sum_abs_cos / count as f64;
        assert!(mean < 0.15, "mean |cos| = {mean}");
    }
}
