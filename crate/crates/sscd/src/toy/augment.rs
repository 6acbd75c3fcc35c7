//! Vector-space augmentations and two-source mixing.

use ndarray::ArrayView1;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::descriptor::Vector;
use crate::error::{Error, Result};
use crate::loss::MixMode;

/// Augmentation strengths. The default mix probability is split evenly
/// between mixup and cutmix when a mix event fires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentParams {
    /// Additive Gaussian noise sigma (per coordinate).
    pub noise_sigma: f64,
    /// Probability of zeroing each coordinate independently.
    pub dropout_prob: f64,
    /// Uniform multiplicative scale range.
    pub scale_range: (f64, f64),
    /// Probability that a view is mixed with another source.
    pub mix_prob: f64,
    /// Beta(alpha, alpha) parameter for the mixing weight gamma. Values
    /// above 1 reduce the prevalence of trivial mixes that draw nearly all
    /// content from one input.
    pub alpha: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            noise_sigma: 0.2,
            dropout_prob: 0.1,
            scale_range: (0.8, 1.25),
            mix_prob: 0.05,
            alpha: 2.0,
        }
    }
}

impl AugmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "noise_sigma",
                reason: format!("must be >= 0, got {}", self.noise_sigma),
            });
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::InvalidParameter {
                name: "dropout_prob",
                reason: format!("must be in [0, 1), got {}", self.dropout_prob),
            });
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "scale_range",
                reason: format!("must be a positive interval, got [{lo}, {hi}]"),
            });
        }
        if !(0.0..=1.0).contains(&self.mix_prob) {
            return Err(Error::InvalidParameter {
                name: "mix_prob",
                reason: format!("must be in [0, 1], got {}", self.mix_prob),
            });
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be > 0, got {}", self.alpha),
            });
        }
        Ok(())
    }
}

/// One augmented view of a source vector: uniform scale, additive Gaussian
/// noise, then independent coordinate dropout.
pub fn augment<R: Rng>(x: ArrayView1<'_, f64>, params: &AugmentParams, rng: &mut R) -> Vector {
    let (lo, hi) = params.scale_range;
    let scale = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let mut out: Vector = x.mapv(|v| v * scale);
    if params.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, params.noise_sigma).expect("validated sigma");
        out.mapv_inplace(|v| v + noise.sample(rng));
    }
    if params.dropout_prob > 0.0 {
        for v in out.iter_mut() {
            if rng.random_range(0.0..1.0) < params.dropout_prob {
                *v = 0.0;
            }
        }
    }
    out
}

/// Blend two vectors with weight gamma.
///
/// Mixup is the convex combination `gamma a + (1 - gamma) b`; cutmix
/// replaces a contiguous block of `round((1 - gamma) m)` coordinates of `a`
/// with `b`'s values, starting at a uniformly random position with
/// wrap-around (the vector analog of pasting a rectangular crop).
pub fn mix_views<R: Rng>(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    gamma: f64,
    mode: MixMode,
    rng: &mut R,
) -> Result<Vector> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be in [0, 1], got {gamma}"),
        });
    }
    match mode {
        MixMode::Mixup => Ok(a.mapv(|v| v * gamma) + b.mapv(|v| v * (1.0 - gamma))),
        MixMode::Cutmix => {
            let m = a.len();
            let block = ((1.0 - gamma) * m as f64).round() as usize;
            let mut out = a.to_owned();
            if block > 0 {
                let start = rng.random_range(0..m);
                for offset in 0..block.min(m) {
                    let idx = (start + offset) % m;
                    out[idx] = b[idx];
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identity_params_return_input() {
        let params = AugmentParams {
            noise_sigma: 0.0,
            dropout_prob: 0.0,
            scale_range: (1.0, 1.0),
            mix_prob: 0.0,
            alpha: 2.0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let x = array![1.0, -2.0, 3.0];
        let out = augment(x.view(), &params, &mut rng);
        assert_eq!(out, x);
    }

    #[test]
    fn noise_variance_matches_monte_carlo() {
        // with scale fixed to 1 and no dropout, E|x' - x|^2 = m sigma^2
        let m = 64;
        let sigma = 0.2;
        let params = AugmentParams {
            noise_sigma: sigma,
            dropout_prob: 0.0,
            scale_range: (1.0, 1.0),
            mix_prob: 0.0,
            alpha: 2.0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let x = Vector::zeros(m) + 0.5;
        let trials = 4000;
        let mut total = 0.0;
        for _ in 0..trials {
            let out = augment(x.view(), &params, &mut rng);
            let diff = &out - &x;
            total += diff.dot(&diff);
        }
        let observed = total / trials as f64;
        let expected = m as f64 * sigma * sigma;
        assert!(
            (observed - expected).abs() / expected < 0.05,
            "observed {observed}, expected {expected}"
        );
    }

    #[test]
    fn dropout_prob_one_rejected() {
        let params = AugmentParams {
            dropout_prob: 1.0,
            ..Default::default()
        };
        assert!(params.validate().is_err());
    }

    #[test]
    fn gamma_one_returns_first_input() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let a = array![2.0, 0.0];
        let b = array![0.0, 2.0];
        for mode in [MixMode::Mixup, MixMode::Cutmix] {
            let out = mix_views(a.view(), b.view(), 1.0, mode, &mut rng).unwrap();
            assert_eq!(out, a);
        }
    }

    #[test]
    fn mixup_midpoint() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let out = mix_views(
            array![2.0, 0.0].view(),
            array![0.0, 2.0].view(),
            0.5,
            MixMode::Mixup,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out, array![1.0, 1.0]);
    }

    #[test]
    fn cutmix_block_size_is_rounded() {
        // gamma = 0.75, m = 8: exactly round(0.25 * 8) = 2 coordinates from b
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let a = Vector::zeros(8);
        let b = Vector::ones(8);
        for _ in 0..50 {
            let out = mix_views(a.view(), b.view(), 0.75, MixMode::Cutmix, &mut rng).unwrap();
            let from_b = out.iter().filter(|&&v| v == 1.0).count();
            assert_eq!(from_b, 2);
        }
    }

    #[test]
    fn cutmix_block_is_contiguous_mod_wraparound() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let a = Vector::zeros(10);
        let b = Vector::ones(10);
        for _ in 0..50 {
            let out = mix_views(a.view(), b.view(), 0.6, MixMode::Cutmix, &mut rng).unwrap();
            let marks: Vec<usize> = out
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1.0)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(marks.len(), 4);
            // contiguous allowing wrap: at most one break in circular order
            let gaps = (0..marks.len())
                .filter(|&w| (marks[w] + 1) % 10 != marks[(w + 1) % marks.len()])
                .count();
            assert!(gaps <= 1, "non-contiguous block: {marks:?}");
        }
    }
}
