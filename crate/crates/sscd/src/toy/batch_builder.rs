//! Assembling a training batch: two augmented views per source, optional
//! mixing, and the induced match structure.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::descriptor::Matrix;
use crate::error::{Error, Result};
use crate::loss::{BatchStructure, MixMode, MixWeight};
use crate::toy::augment::{augment, mix_views, AugmentParams};
use crate::toy::source::ToySource;

/// A built batch: inputs (2n x input_dim, views i and i+n derive from the
/// i-th sampled source) and the match structure over the views.
#[derive(Debug, Clone)]
pub struct BatchViews {
    pub inputs: Matrix,
    pub structure: BatchStructure,
    /// Positions (into `sources`) of the n sampled sources.
    pub sampled: Vec<usize>,
}

/// Sample `n` distinct sources and emit two augmented views of each.
///
/// With probability `mix_prob` a view is blended with another sampled
/// source; such a view is attributed to both sources, and match sets expand
/// to all views sharing any source.
pub fn build_batch<R: Rng>(
    sources: &[ToySource],
    params: &AugmentParams,
    rng: &mut R,
    n: usize,
) -> Result<BatchViews> {
    params.validate()?;
    if n == 0 || n > sources.len() {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need 1 <= n <= {}, got {n}", sources.len()),
        });
    }
    let dim = sources[0].vector.len();

    let sampled: Vec<usize> = rand::seq::index::sample(rng, sources.len(), n).into_vec();

    let total = 2 * n;
    let mut inputs = Array2::zeros((total, dim));
    // per view: the batch-local source positions it draws content from
    let mut attribution: Vec<Vec<usize>> = Vec::with_capacity(total);
    for view in 0..total {
        let own = view % n;
        let x = sources[sampled[own]].vector.view();
        inputs.row_mut(view).assign(&augment(x, params, rng));
        attribution.push(vec![own]);
    }

    // mixing pass, in view order so the RNG stream is reproducible
    let mut mix_meta: Vec<Option<MixWeight>> = vec![None; total];
    if params.mix_prob > 0.0 && n > 1 {
        let beta = Beta::new(params.alpha, params.alpha).map_err(|e| Error::InvalidParameter {
            name: "alpha",
            reason: e.to_string(),
        })?;
        for view in 0..total {
            if rng.random_range(0.0..1.0) >= params.mix_prob {
                continue;
            }
            let own = view % n;
            // pick a different sampled source
            let offset = rng.random_range(1..n);
            let other = (own + offset) % n;
            let gamma: f64 = beta.sample(rng);
            let mode = if rng.random_range(0.0..1.0) < 0.5 {
                MixMode::Mixup
            } else {
                MixMode::Cutmix
            };
            let mixed = mix_views(
                inputs.row(view),
                sources[sampled[other]].vector.view(),
                gamma,
                mode,
                rng,
            )?;
            inputs.row_mut(view).assign(&mixed);
            attribution[view] = vec![own, other];
            mix_meta[view] = Some(MixWeight {
                source_a: own,
                source_b: other,
                gamma,
                mode,
            });
        }
    }

    // match sets: any two views sharing any source are positives
    let mut match_sets: Vec<Vec<usize>> = vec![Vec::new(); total];
    for i in 0..total {
        for j in 0..total {
            if i == j {
                continue;
            }
            let shares = attribution[i]
                .iter()
                .any(|s| attribution[j].contains(s));
            if shares {
                match_sets[i].push(j);
            }
        }
    }

    let structure = BatchStructure::new(match_sets)?.with_mix_weights(mix_meta)?;
    Ok(BatchViews {
        inputs,
        structure,
        sampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::source::generate_sources;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn no_mixing_gives_plain_pairs() {
        let sources = generate_sources(16, 8, 1).unwrap();
        let params = AugmentParams {
            mix_prob: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let batch = build_batch(&sources, &params, &mut rng, 8).unwrap();
        assert_eq!(batch.inputs.nrows(), 16);
        assert!(batch.structure.single_positive());
        for i in 0..8 {
            assert_eq!(batch.structure.matches(i), &[i + 8]);
            assert_eq!(batch.structure.matches(i + 8), &[i]);
        }
    }

    #[test]
    fn mixed_view_matches_both_sources_views() {
        let sources = generate_sources(8, 6, 3).unwrap();
        let params = AugmentParams {
            mix_prob: 1.0,
            ..Default::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let batch = build_batch(&sources, &params, &mut rng, 4).unwrap();
        let mix = batch.structure.mix_weights().unwrap();
        for (view, meta) in mix.iter().enumerate() {
            let Some(m) = meta else { continue };
            // the other source's two views must be among this view's matches
            for other_view in [m.source_b, m.source_b + 4] {
                if other_view != view {
                    assert!(
                        batch.structure.matches(view).contains(&other_view),
                        "view {view} mixed from {:?} should match view {other_view}",
                        (m.source_a, m.source_b),
                    );
                }
            }
        }
    }

    #[test]
    fn match_sets_symmetric_across_many_batches() {
        let sources = generate_sources(32, 8, 5).unwrap();
        let params = AugmentParams {
            mix_prob: 0.3,
            ..Default::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..200 {
            let batch = build_batch(&sources, &params, &mut rng, 8).unwrap();
            let s = &batch.structure;
            for i in 0..s.size() {
                for &j in s.matches(i) {
                    assert!(s.matches(j).contains(&i));
                }
            }
        }
    }

    #[test]
    fn deterministic_given_rng_seed() {
        let sources = generate_sources(16, 8, 7).unwrap();
        let params = AugmentParams::default();
        let a = build_batch(&sources, &params, &mut ChaCha12Rng::seed_from_u64(9), 8).unwrap();
        let b = build_batch(&sources, &params, &mut ChaCha12Rng::seed_from_u64(9), 8).unwrap();
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.structure, b.structure);
        assert_eq!(a.sampled, b.sampled);
    }
}
