//! Background-set similarity normalization.
//!
//! A query's raw cosine similarity to a reference is offset by how similar
//! the query is to a background image distribution: queries sitting in dense
//! regions get a larger bias subtracted, making scores comparable across
//! queries. The bias averages the similarities to background neighbors of
//! ranks n..=n_end, weighted by beta.
//!
//! The bias can be folded into the descriptors themselves as one extra
//! coordinate, turning normalized similarity back into a plain dot product;
//! and maximum-inner-product search over such non-normalized descriptors
//! reduces to L2 search with one more augmentation coordinate.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::descriptor::{DescriptorSet, Vector};
use crate::error::{Error, Result};
use crate::eval::{knn_search, Metric};

/// Which neighbors of the background set feed the bias, and its weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreNormConfig {
    /// First neighbor rank (1-based).
    pub n: usize,
    /// Last neighbor rank, inclusive.
    pub n_end: usize,
    /// Bias weight.
    pub beta: f64,
}

impl Default for ScoreNormConfig {
    fn default() -> Self {
        Self {
            n: 1,
            n_end: 3,
            beta: 1.0,
        }
    }
}

impl ScoreNormConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.n_end < self.n {
            return Err(Error::InvalidParameter {
                name: "score_norm",
                reason: format!("need 1 <= n <= n_end, got n={} n_end={}", self.n, self.n_end),
            });
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must be >= 0, got {}", self.beta),
            });
        }
        Ok(())
    }
}

/// Bias for one query: `beta / (1 + n_end - n) * sum of similarities to the
/// n-th..n_end-th nearest background neighbors` (cosine, ties broken by id).
pub fn background_bias(
    query: &Vector,
    background: &DescriptorSet,
    cfg: &ScoreNormConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_background(background, cfg.n_end)?;
    if query.len() != background.dim() {
        return Err(Error::DimensionMismatch {
            expected: background.dim(),
            actual: query.len(),
        });
    }
    let sims = background.data().dot(query);
    let mut order: Vec<usize> = (0..background.count()).collect();
    order.sort_unstable_by(|&a, &b| {
        sims[b]
            .partial_cmp(&sims[a])
            .expect("finite similarities")
            .then_with(|| background.ids()[a].cmp(&background.ids()[b]))
    });
    let picked = &order[cfg.n - 1..cfg.n_end];
    let sum: f64 = picked.iter().map(|&i| sims[i]).sum();
    Ok(cfg.beta / (1.0 + cfg.n_end as f64 - cfg.n as f64) * sum)
}

/// Biases for a whole query set, via one k-NN pass over the background.
///
/// A background entry whose id collides with the query's own id is excluded
/// from that query's neighbor ranking (a query must not normalize against
/// itself).
pub fn background_biases(
    queries: &DescriptorSet,
    background: &DescriptorSet,
    cfg: &ScoreNormConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_background(background, cfg.n_end)?;
    // one extra neighbor absorbs a potential id collision
    let k = (cfg.n_end + 1).min(background.count());
    let candidates = knn_search(queries, background, k, Metric::InnerProduct)?;
    let per_query = k;
    let mut biases = Vec::with_capacity(queries.count());
    for (qi, qid) in queries.ids().iter().enumerate() {
        let ranked = &candidates[qi * per_query..(qi + 1) * per_query];
        let kept: Vec<&crate::eval::MatchCandidate> =
            ranked.iter().filter(|c| c.ref_id != *qid).collect();
        if kept.len() < cfg.n_end {
            return Err(Error::BackgroundTooSmall {
                count: kept.len(),
                needed: cfg.n_end,
            });
        }
        let sum: f64 = kept[cfg.n - 1..cfg.n_end].iter().map(|c| c.score).sum();
        biases.push(cfg.beta / (1.0 + cfg.n_end as f64 - cfg.n as f64) * sum);
    }
    Ok(biases)
}

fn check_background(background: &DescriptorSet, n_end: usize) -> Result<()> {
    if background.count() < n_end {
        return Err(Error::BackgroundTooSmall {
            count: background.count(),
            needed: n_end,
        });
    }
    if !background.is_normalized() {
        return Err(Error::InvalidParameter {
            name: "background",
            reason: "background set must be L2-normalized".to_string(),
        });
    }
    Ok(())
}

/// Normalized similarity: raw score minus the per-query bias.
pub fn normalized_similarity(s: f64, bias: f64) -> f64 {
    s - bias
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BiasedRole {
    Query,
    Reference,
}

/// Descriptors with the bias folded in as an extra coordinate:
/// queries carry `-bias` and references carry `1`, so the augmented dot
/// product equals the normalized similarity exactly. The rows are NOT
/// unit-normalized.
#[derive(Debug, Clone)]
pub struct BiasedDescriptorSet {
    set: DescriptorSet,
    role: BiasedRole,
}

impl BiasedDescriptorSet {
    pub fn set(&self) -> &DescriptorSet {
        &self.set
    }

    pub fn role(&self) -> BiasedRole {
        self.role
    }

    pub(crate) fn from_parts(set: DescriptorSet, role: BiasedRole) -> Self {
        Self { set, role }
    }
}

/// Append `-bias(q)` to each query descriptor.
pub fn integrate_bias(queries: &DescriptorSet, biases: &[f64]) -> Result<BiasedDescriptorSet> {
    if biases.len() != queries.count() {
        return Err(Error::LengthMismatch {
            what: "biases",
            expected: queries.count(),
            actual: biases.len(),
        });
    }
    let d = queries.dim();
    let mut data = Array2::zeros((queries.count(), d + 1));
    for (i, row) in queries.data().rows().into_iter().enumerate() {
        data.slice_mut(ndarray::s![i, ..d]).assign(&row);
        data[[i, d]] = -biases[i];
    }
    Ok(BiasedDescriptorSet {
        set: DescriptorSet::new(queries.ids().to_vec(), data)?,
        role: BiasedRole::Query,
    })
}

/// Append the constant `1` to each reference descriptor.
pub fn extend_references(refs: &DescriptorSet) -> Result<BiasedDescriptorSet> {
    let d = refs.dim();
    let mut data = Array2::zeros((refs.count(), d + 1));
    for (i, row) in refs.data().rows().into_iter().enumerate() {
        data.slice_mut(ndarray::s![i, ..d]).assign(&row);
        data[[i, d]] = 1.0;
    }
    Ok(BiasedDescriptorSet {
        set: DescriptorSet::new(refs.ids().to_vec(), data)?,
        role: BiasedRole::Reference,
    })
}

/// References rewritten for L2 indexing of a max-inner-product task.
///
/// Every reference gains one coordinate `sqrt(M^2 - |r|^2)` (M = largest
/// reference norm), making all augmented norms equal M; queries gain a zero.
/// Nearest-by-L2 over the augmented vectors is exactly
/// largest-by-dot-product over the originals.
#[derive(Debug, Clone)]
pub struct L2ReducedSet {
    references: DescriptorSet,
    max_norm: f64,
}

impl L2ReducedSet {
    pub fn references(&self) -> &DescriptorSet {
        &self.references
    }

    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    /// Append the zero coordinate to a query for searching this set.
    pub fn augment_query(&self, query: &Vector) -> Result<Vector> {
        if query.len() + 1 != self.references.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.references.dim() - 1,
                actual: query.len(),
            });
        }
        let mut out = Vector::zeros(query.len() + 1);
        out.slice_mut(ndarray::s![..query.len()]).assign(query);
        Ok(out)
    }

    /// Augment a whole query set.
    pub fn augment_queries(&self, queries: &DescriptorSet) -> Result<DescriptorSet> {
        if queries.dim() + 1 != self.references.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.references.dim() - 1,
                actual: queries.dim(),
            });
        }
        let d = queries.dim();
        let mut data = Array2::zeros((queries.count(), d + 1));
        for (i, row) in queries.data().rows().into_iter().enumerate() {
            data.slice_mut(ndarray::s![i, ..d]).assign(&row);
        }
        DescriptorSet::new(queries.ids().to_vec(), data)
    }
}

/// Convert a (possibly biased) reference set for max-inner-product search
/// into an L2-searchable set.
pub fn mips_to_l2(refs: &DescriptorSet) -> Result<L2ReducedSet> {
    let d = refs.dim();
    let norms_sq: Vec<f64> = refs
        .data()
        .rows()
        .into_iter()
        .map(|r| r.dot(&r))
        .collect();
    let max_sq = norms_sq.iter().cloned().fold(0.0, f64::max);
    let mut data = Array2::zeros((refs.count(), d + 1));
    for (i, row) in refs.data().rows().into_iter().enumerate() {
        data.slice_mut(ndarray::s![i, ..d]).assign(&row);
        data[[i, d]] = (max_sq - norms_sq[i]).max(0.0).sqrt();
    }
    Ok(L2ReducedSet {
        references: DescriptorSet::new(refs.ids().to_vec(), data)?,
        max_norm: max_sq.sqrt(),
    })
}

/// Rewrite candidate scores as `score - bias(query)`. Every candidate's
/// query must appear in `query_ids`.
pub fn apply_bias_to_candidates(
    candidates: &[crate::eval::MatchCandidate],
    query_ids: &[String],
    biases: &[f64],
) -> Result<Vec<crate::eval::MatchCandidate>> {
    if query_ids.len() != biases.len() {
        return Err(Error::LengthMismatch {
            what: "biases",
            expected: query_ids.len(),
            actual: biases.len(),
        });
    }
    let table: std::collections::HashMap<&str, f64> = query_ids
        .iter()
        .map(|id| id.as_str())
        .zip(biases.iter().copied())
        .collect();
    candidates
        .iter()
        .map(|c| {
            let bias = table.get(c.query_id.as_str()).ok_or_else(|| {
                Error::InvalidParameter {
                    name: "candidates",
                    reason: format!("no bias for query {:?}", c.query_id),
                }
            })?;
            Ok(crate::eval::MatchCandidate {
                query_id: c.query_id.clone(),
                ref_id: c.ref_id.clone(),
                score: normalized_similarity(c.score, *bias),
            })
        })
        .collect()
}

/// One cell of the score-normalization parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub n: usize,
    pub n_end: usize,
    pub beta: f64,
    pub micro_ap: f64,
}

/// Evaluate µAP over the (n, n_end, beta) grid: for each cell, candidate
/// scores are normalized with that cell's bias and scored against the ground
/// truth. Background neighbor similarities are gathered once.
pub fn score_normalization_sweep(
    queries: &DescriptorSet,
    refs: &DescriptorSet,
    background: &DescriptorSet,
    gt: &crate::eval::GroundTruth,
    k: usize,
    n_max: usize,
    betas: &[f64],
) -> Result<Vec<SweepCell>> {
    if n_max == 0 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            reason: "must be >= 1".to_string(),
        });
    }
    check_background(background, n_max)?;
    let raw = knn_search(queries, refs, k, Metric::InnerProduct)?;

    // top-(n_max + 1) background similarities per query, self-collisions
    // dropped, computed once for the whole grid
    let kbg = (n_max + 1).min(background.count());
    let neighbor_sims = knn_search(queries, background, kbg, Metric::InnerProduct)?;
    let mut per_query_sims: Vec<Vec<f64>> = Vec::with_capacity(queries.count());
    for (qi, qid) in queries.ids().iter().enumerate() {
        let ranked = &neighbor_sims[qi * kbg..(qi + 1) * kbg];
        let kept: Vec<f64> = ranked
            .iter()
            .filter(|c| c.ref_id != *qid)
            .map(|c| c.score)
            .collect();
        if kept.len() < n_max {
            return Err(Error::BackgroundTooSmall {
                count: kept.len(),
                needed: n_max,
            });
        }
        per_query_sims.push(kept);
    }

    let mut cells = Vec::new();
    for n in 1..=n_max {
        for n_end in n..=n_max {
            for &beta in betas {
                let cfg = ScoreNormConfig { n, n_end, beta };
                cfg.validate()?;
                let biases: Vec<f64> = per_query_sims
                    .iter()
                    .map(|sims| {
                        let sum: f64 = sims[n - 1..n_end].iter().sum();
                        beta / (1.0 + n_end as f64 - n as f64) * sum
                    })
                    .collect();
                let rescored =
                    apply_bias_to_candidates(&raw, queries.ids(), &biases)?;
                let (uap, _) = crate::eval::micro_ap(&rescored, gt);
                cells.push(SweepCell {
                    n,
                    n_end,
                    beta,
                    micro_ap: uap,
                });
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::l2_normalize;
    use ndarray::{arr2, Array2};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn unit_set(prefix: &str, n: usize, d: usize, seed: u64) -> DescriptorSet {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let ids = (0..n).map(|i| format!("{prefix}{i:03}")).collect();
        DescriptorSet::new(ids, data).unwrap().l2_normalized().unwrap()
    }

    /// Background engineered so a unit query along axis 0 sees top-3
    /// similarities (0.5, 0.4, 0.3).
    fn engineered_background() -> (Vector, DescriptorSet) {
        let q = Vector::from_vec(vec![1.0, 0.0]);
        let rows = [0.5, 0.4, 0.3, 0.1];
        let mut data = Array2::zeros((4, 2));
        for (i, &c) in rows.iter().enumerate() {
            data[[i, 0]] = c;
            data[[i, 1]] = (1.0 - c * c as f64).sqrt();
        }
        let ids = (0..4).map(|i| format!("b{i}")).collect();
        (q, DescriptorSet::new_normalized(ids, data).unwrap())
    }

    #[test]
    fn beta_zero_gives_zero_bias() {
        let (q, bg) = engineered_background();
        let cfg = ScoreNormConfig {
            n: 1,
            n_end: 3,
            beta: 0.0,
        };
        assert_eq!(background_bias(&q, &bg, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn mean_of_top_three_neighbors() {
        let (q, bg) = engineered_background();
        let cfg = ScoreNormConfig::default();
        let bias = background_bias(&q, &bg, &cfg).unwrap();
        assert!((bias - 0.4).abs() < 1e-12, "bias {bias}");
    }

    #[test]
    fn single_second_neighbor() {
        let (q, bg) = engineered_background();
        let cfg = ScoreNormConfig {
            n: 2,
            n_end: 2,
            beta: 1.0,
        };
        let bias = background_bias(&q, &bg, &cfg).unwrap();
        assert!((bias - 0.4).abs() < 1e-12, "bias {bias}");
    }

    #[test]
    fn bias_is_linear_in_beta() {
        let (q, bg) = engineered_background();
        let base = background_bias(&q, &bg, &ScoreNormConfig::default()).unwrap();
        let doubled = background_bias(
            &q,
            &bg,
            &ScoreNormConfig {
                beta: 2.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((doubled - 2.0 * base).abs() < 1e-15);
    }

    #[test]
    fn too_small_background_rejected() {
        let (q, bg) = engineered_background();
        let cfg = ScoreNormConfig {
            n: 1,
            n_end: 9,
            beta: 1.0,
        };
        assert!(matches!(
            background_bias(&q, &bg, &cfg),
            Err(Error::BackgroundTooSmall { .. })
        ));
    }

    #[test]
    fn batch_biases_match_single_path_and_exclude_self() {
        let queries = unit_set("x", 6, 5, 1);
        let background = unit_set("b", 40, 5, 2);
        let cfg = ScoreNormConfig::default();
        let batch = background_biases(&queries, &background, &cfg).unwrap();
        for (i, &b) in batch.iter().enumerate() {
            let single =
                background_bias(&queries.row(i).to_owned(), &background, &cfg).unwrap();
            assert!((b - single).abs() < 1e-12);
        }

        // a query that IS a background entry: its self-similarity (1.0) must
        // not enter the bias
        let mut with_self_ids: Vec<String> = background.ids().to_vec();
        with_self_ids[0] = "x000".to_string();
        let bg_with_self =
            DescriptorSet::new_normalized(with_self_ids, background.data().clone()).unwrap();
        let mut qdata = Array2::zeros((1, 5));
        qdata.row_mut(0).assign(&background.row(0));
        let q_self = DescriptorSet::new(vec!["x000".to_string()], qdata)
            .unwrap()
            .l2_normalized()
            .unwrap();
        let biased = background_biases(&q_self, &bg_with_self, &cfg).unwrap();
        // computing against the background WITHOUT that entry gives the same
        let rest: Vec<usize> = (1..background.count()).collect();
        let bg_rest = bg_with_self.select(&rest).unwrap();
        let expected = background_bias(&q_self.row(0).to_owned(), &bg_rest, &cfg).unwrap();
        assert!((biased[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn normalized_similarity_is_subtraction() {
        assert!((normalized_similarity(0.8, 0.4) - 0.4).abs() < 1e-15);
        assert_eq!(normalized_similarity(0.7, 0.0), 0.7);
        assert_eq!(normalized_similarity(0.3, 0.3), 0.0);
    }

    #[test]
    fn integrated_bias_algebraic_identity() {
        let zq = Vector::from_vec(vec![0.6, 0.8]);
        let zr = Vector::from_vec(vec![1.0, 0.0]);
        let queries = DescriptorSet::new(vec!["q".into()], arr2(&[[0.6, 0.8]])).unwrap();
        let refs = DescriptorSet::new(vec!["r".into()], arr2(&[[1.0, 0.0]])).unwrap();
        let bq = integrate_bias(&queries, &[0.2]).unwrap();
        let br = extend_references(&refs).unwrap();
        let aug: f64 = bq.set().row(0).dot(&br.set().row(0));
        assert!((aug - 0.4).abs() < 1e-15);
        assert!((aug - (zq.dot(&zr) - 0.2)).abs() < 1e-15);
        assert!(!bq.set().is_normalized());
        assert_eq!(br.set().row(0)[2], 1.0);
    }

    #[test]
    fn integrated_bias_matches_two_step_on_random_triples() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let d = 8;
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = l2_normalize(&Vector::from_vec(q)).unwrap();
            let r = l2_normalize(&Vector::from_vec(r)).unwrap();
            let bias: f64 = rng.random_range(-0.5..0.5);

            let queries =
                DescriptorSet::new(vec!["q".into()], q.clone().insert_axis(ndarray::Axis(0)))
                    .unwrap();
            let refs =
                DescriptorSet::new(vec!["r".into()], r.clone().insert_axis(ndarray::Axis(0)))
                    .unwrap();
            let bq = integrate_bias(&queries, &[bias]).unwrap();
            let br = extend_references(&refs).unwrap();
            let aug: f64 = bq.set().row(0).dot(&br.set().row(0));
            let two_step = normalized_similarity(q.dot(&r), bias);
            assert!((aug - two_step).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_references_get_zero_augmentation() {
        let refs = unit_set("r", 10, 4, 9);
        let reduced = mips_to_l2(&refs).unwrap();
        assert!((reduced.max_norm() - 1.0).abs() < 1e-12);
        for row in reduced.references().data().rows() {
            assert!(row[4].abs() < 1e-6);
        }
    }

    #[test]
    fn two_reference_example() {
        let refs = DescriptorSet::new(
            vec!["a".into(), "b".into()],
            arr2(&[[1.0, 0.0], [0.5, 0.0]]),
        )
        .unwrap();
        let reduced = mips_to_l2(&refs).unwrap();
        assert_eq!(reduced.max_norm(), 1.0);
        assert_eq!(reduced.references().row(0)[2], 0.0);
        assert!((reduced.references().row(1)[2] - 0.75f64.sqrt()).abs() < 1e-15);

        let q = Vector::from_vec(vec![1.0, 0.0]);
        let aug_q = reduced.augment_query(&q).unwrap();
        let d2: Vec<f64> = (0..2)
            .map(|i| {
                let diff = &aug_q - &reduced.references().row(i);
                diff.dot(&diff)
            })
            .collect();
        // dot ranking (1.0 > 0.5) should match inverted L2 ranking
        assert!(d2[0] < d2[1]);
    }

    #[test]
    fn augmented_reference_norms_are_constant() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let data = Array2::from_shape_fn((30, 6), |_| rng.random_range(-2.0..2.0));
        let ids = (0..30).map(|i| format!("r{i}")).collect();
        let refs = DescriptorSet::new(ids, data).unwrap();
        let reduced = mips_to_l2(&refs).unwrap();
        for row in reduced.references().data().rows() {
            assert!((row.dot(&row).sqrt() - reduced.max_norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn full_ranking_equivalence_random_sets() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for trial in 0..20 {
            let n = 30;
            let d = 5;
            let data = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.5..1.5));
            let ids = (0..n).map(|i| format!("r{i:02}")).collect();
            let refs = DescriptorSet::new(ids, data).unwrap();
            let reduced = mips_to_l2(&refs).unwrap();
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = Vector::from_vec(q);
            let aug_q = reduced.augment_query(&q).unwrap();

            let mut by_dot: Vec<usize> = (0..n).collect();
            by_dot.sort_by(|&a, &b| {
                refs.row(b)
                    .dot(&q)
                    .partial_cmp(&refs.row(a).dot(&q))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut by_l2: Vec<usize> = (0..n).collect();
            by_l2.sort_by(|&a, &b| {
                let da = {
                    let diff = &aug_q - &reduced.references().row(a);
                    diff.dot(&diff)
                };
                let db = {
                    let diff = &aug_q - &reduced.references().row(b);
                    diff.dot(&diff)
                };
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });
            assert_eq!(by_dot, by_l2, "trial {trial}");
        }
    }
}
