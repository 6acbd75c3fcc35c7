//! The toy training loop: deterministic, plain gradient descent on the
//! combined objective, with per-epoch probe diagnostics.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::descriptor::{principal_spectrum, DescriptorSet, Matrix};
use crate::error::{Error, Result};
use crate::eval::{knn_search, micro_ap, mrr, recall_at_1, GroundTruth, Metric};
use crate::loss::{infonce, infonce_mix, koleo, LossConfig};
use crate::toy::augment::{augment, AugmentParams};
use crate::toy::batch_builder::build_batch;
use crate::toy::encoder::{Encoder, EncoderKind};
use crate::toy::source::{generate_sources, ToySource};

/// Learning-rate schedule over epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Schedule {
    Constant,
    /// Linear ramp over `warmup_epochs`, then cosine decay to zero without
    /// restarts.
    Cosine { warmup_epochs: usize },
}

impl Schedule {
    pub fn lr_at(&self, base: f64, epoch: usize, total_epochs: usize) -> f64 {
        match *self {
            Schedule::Constant => base,
            Schedule::Cosine { warmup_epochs } => {
                if epoch < warmup_epochs {
                    base * (epoch + 1) as f64 / warmup_epochs as f64
                } else {
                    let span = (total_epochs.saturating_sub(warmup_epochs)).max(1) as f64;
                    let t = (epoch - warmup_epochs) as f64 / span;
                    base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Number of synthetic sources (K).
    pub sources: usize,
    /// Input dimension (m).
    pub input_dim: usize,
    /// Descriptor dimension (d).
    pub descriptor_dim: usize,
    /// Sources per batch (N); the batch holds 2N views.
    pub batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub schedule: Schedule,
    pub seed: u64,
    pub loss: LossConfig,
    pub augment: AugmentParams,
    pub encoder: EncoderKind,
    /// Fraction of sources held out as the probe split.
    pub holdout_fraction: f64,
    /// Candidates per probe query in the retrieval diagnostic.
    pub probe_k: usize,
    /// Augmentation applied to probe queries. Fixed at the standard mild
    /// strengths by default so the probe task stays comparable when the
    /// training augmentation is varied.
    pub probe_augment: AugmentParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sources: 512,
            input_dim: 64,
            descriptor_dim: 32,
            batch: 128,
            epochs: 30,
            learning_rate: 2.0,
            schedule: Schedule::Constant,
            seed: 0,
            loss: LossConfig::default(),
            augment: AugmentParams::default(),
            encoder: EncoderKind::Linear,
            holdout_fraction: 0.2,
            probe_k: 10,
            probe_augment: AugmentParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn holdout_count(&self) -> usize {
        ((self.sources as f64 * self.holdout_fraction).round() as usize).max(2)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.augment.validate()?;
        if self.sources < 4 {
            return Err(Error::InvalidParameter {
                name: "sources",
                reason: format!("need at least 4 sources, got {}", self.sources),
            });
        }
        if self.input_dim == 0 || self.descriptor_dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dimensions",
                reason: "input_dim and descriptor_dim must be >= 1".to_string(),
            });
        }
        if !(0.0 < self.holdout_fraction && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidParameter {
                name: "holdout_fraction",
                reason: format!("must be in (0, 1), got {}", self.holdout_fraction),
            });
        }
        let holdout = self.holdout_count();
        if holdout + 1 >= self.sources {
            return Err(Error::InvalidParameter {
                name: "holdout_fraction",
                reason: "holdout leaves no training sources".to_string(),
            });
        }
        let train_pool = self.sources - holdout;
        if self.batch == 0 || self.batch > train_pool {
            return Err(Error::InvalidParameter {
                name: "batch",
                reason: format!(
                    "batch must be in 1..={train_pool} (training pool after holdout), got {}",
                    self.batch
                ),
            });
        }
        if self.batch < 2 {
            return Err(Error::InvalidParameter {
                name: "batch",
                reason: "need at least 2 sources per batch for in-batch negatives".to_string(),
            });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter {
                name: "epochs",
                reason: "must be >= 1".to_string(),
            });
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter {
                name: "learning_rate",
                reason: format!("must be >= 0, got {}", self.learning_rate),
            });
        }
        if self.probe_k == 0 {
            return Err(Error::InvalidParameter {
                name: "probe_k",
                reason: "must be >= 1".to_string(),
            });
        }
        Ok(())
    }
}

/// Per-epoch diagnostics (batch-averaged losses, probe measurements).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss_infonce: f64,
    pub loss_koleo: f64,
    pub loss_total: f64,
    pub effective_rank: f64,
    pub toy_uap: f64,
}

/// Final held-out probe evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub micro_ap: f64,
    pub recall_at_1: f64,
    pub mrr: f64,
    pub effective_rank: f64,
    pub max_min_ratio: f64,
    /// Squared distances of true (query, reference) pairs.
    pub positive_sq_distances: Vec<f64>,
    /// Each query's nearest non-matching reference squared distance.
    pub negative_sq_distances: Vec<f64>,
}

impl ProbeReport {
    /// Separation between populations: negative 5th percentile minus
    /// positive 95th percentile (larger is better; can be negative when the
    /// histograms overlap).
    pub fn separation_gap(&self) -> f64 {
        percentile(&self.negative_sq_distances, 0.05)
            - percentile(&self.positive_sq_distances, 0.95)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub final_probe: ProbeReport,
}

/// Nearest-rank percentile of a sample (fraction in [0, 1]).
pub fn percentile(values: &[f64], fraction: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let rank = ((fraction * sorted.len() as f64).ceil() as usize).max(1);
    sorted[rank.min(sorted.len()) - 1]
}

struct ProbeSet {
    ref_inputs: Matrix,
    query_inputs: Matrix,
    ref_ids: Vec<String>,
    query_ids: Vec<String>,
    gt: GroundTruth,
}

fn build_probe(sources: &[ToySource], params: &AugmentParams, seed: u64) -> ProbeSet {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dim = sources[0].vector.len();
    let mut ref_inputs = Array2::zeros((sources.len(), dim));
    let mut query_inputs = Array2::zeros((sources.len(), dim));
    let mut ref_ids = Vec::with_capacity(sources.len());
    let mut query_ids = Vec::with_capacity(sources.len());
    for (i, s) in sources.iter().enumerate() {
        ref_inputs.row_mut(i).assign(&s.vector);
        query_inputs
            .row_mut(i)
            .assign(&augment(s.vector.view(), params, &mut rng));
        ref_ids.push(s.id.clone());
        query_ids.push(format!("q:{}", s.id));
    }
    let gt = GroundTruth::new(
        ref_ids
            .iter()
            .zip(&query_ids)
            .map(|(r, q)| (q.clone(), r.clone())),
    );
    ProbeSet {
        ref_inputs,
        query_inputs,
        ref_ids,
        query_ids,
        gt,
    }
}

struct ProbeEval {
    micro_ap: f64,
    effective_rank: f64,
    max_min_ratio: f64,
    recall_at_1: f64,
    mrr: f64,
    positive_sq: Vec<f64>,
    negative_sq: Vec<f64>,
}

fn evaluate_probe(encoder: &Encoder, probe: &ProbeSet, k: usize) -> Result<ProbeEval> {
    let (ref_z, _) = encoder.forward(&probe.ref_inputs)?;
    let (query_z, _) = encoder.forward(&probe.query_inputs)?;
    let refs = DescriptorSet::new_normalized(probe.ref_ids.clone(), ref_z)?;
    let queries = DescriptorSet::new_normalized(probe.query_ids.clone(), query_z)?;

    let spectrum = principal_spectrum(&refs)?;
    let k = k.min(refs.count());
    let candidates = knn_search(&queries, &refs, k, Metric::InnerProduct)?;
    let (uap, _) = micro_ap(&candidates, &probe.gt);

    // separation populations over the full query x reference product
    let dots = queries.data().dot(&refs.data().t());
    let mut positive_sq = Vec::with_capacity(queries.count());
    let mut negative_sq = Vec::with_capacity(queries.count());
    for qi in 0..queries.count() {
        let mut best_neg = f64::INFINITY;
        for ri in 0..refs.count() {
            let d2 = (2.0 - 2.0 * dots[[qi, ri]]).max(0.0);
            if probe.gt.contains(&probe.query_ids[qi], &probe.ref_ids[ri]) {
                positive_sq.push(d2);
            } else if d2 < best_neg {
                best_neg = d2;
            }
        }
        negative_sq.push(best_neg);
    }

    Ok(ProbeEval {
        micro_ap: uap,
        effective_rank: spectrum.effective_rank,
        max_min_ratio: spectrum.max_min_ratio,
        recall_at_1: recall_at_1(&candidates, &probe.gt),
        mrr: mrr(&candidates, &probe.gt),
        positive_sq,
        negative_sq,
    })
}

/// Re-derive the probe split for a config and encode it with a trained
/// encoder: (references, queries) as normalized descriptor sets. Query ids
/// carry a `q:` prefix over their source id.
pub fn probe_descriptors(
    config: &TrainConfig,
    encoder: &Encoder,
) -> Result<(DescriptorSet, DescriptorSet)> {
    config.validate()?;
    let sources = generate_sources(config.sources, config.input_dim, config.seed)?;
    let holdout = config.holdout_count();
    let probe = build_probe(
        &sources[config.sources - holdout..],
        &config.probe_augment,
        config.seed ^ 0x517c_c1b7_2722_0a95,
    );
    let (ref_z, _) = encoder.forward(&probe.ref_inputs)?;
    let (query_z, _) = encoder.forward(&probe.query_inputs)?;
    Ok((
        DescriptorSet::new_normalized(probe.ref_ids, ref_z)?,
        DescriptorSet::new_normalized(probe.query_ids, query_z)?,
    ))
}

/// Train an encoder on the synthetic benchmark. Deterministic and replayable
/// from (config, seed); aborts with epoch/batch identification if the loss
/// goes non-finite rather than masking instability.
pub fn train(config: &TrainConfig) -> Result<(Encoder, TrainHistory)> {
    config.validate()?;

    let sources = generate_sources(config.sources, config.input_dim, config.seed)?;
    let holdout = config.holdout_count();
    let train_pool = &sources[..config.sources - holdout];
    let probe_sources = &sources[config.sources - holdout..];

    let probe = build_probe(
        probe_sources,
        &config.probe_augment,
        config.seed ^ 0x517c_c1b7_2722_0a95,
    );

    let mut encoder = Encoder::new(
        config.encoder,
        config.input_dim,
        config.descriptor_dim,
        config.seed ^ 0x9e37_79b9_7f4a_7c15,
    );

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_pool.len()).collect();

    for epoch in 0..config.epochs {
        let lr = config.schedule.lr_at(config.learning_rate, epoch, config.epochs);
        order.shuffle(&mut rng);

        let mut sum_infonce = 0.0;
        let mut sum_koleo = 0.0;
        let mut sum_total = 0.0;
        let mut batches = 0usize;

        for chunk in order.chunks(config.batch) {
            if chunk.len() < 2 {
                continue; // a single source has no in-batch negatives
            }
            let batch_sources: Vec<ToySource> =
                chunk.iter().map(|&i| train_pool[i].clone()).collect();
            let views = build_batch(&batch_sources, &config.augment, &mut rng, chunk.len())?;
            let (z, cache) = encoder.forward(&views.inputs)?;

            let contrastive = if views.structure.single_positive() {
                infonce(&z, &views.structure, config.loss.tau)?
            } else {
                infonce_mix(&z, &views.structure, config.loss.tau)?
            };
            let entropy = koleo(&z, &views.structure)?;
            let total = contrastive.value + config.loss.lambda * entropy.value;
            if !total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batches,
                });
            }
            sum_infonce += contrastive.value;
            sum_koleo += entropy.value;
            sum_total += total;
            batches += 1;

            if lr > 0.0 {
                let dz = contrastive.grad + entropy.grad * config.loss.lambda;
                let grads = encoder.backward(&cache, &dz);
                encoder.apply_step(&grads, lr);
            }
        }

        let eval = evaluate_probe(&encoder, &probe, config.probe_k)?;
        let denom = batches.max(1) as f64;
        history.push(EpochStats {
            epoch,
            loss_infonce: sum_infonce / denom,
            loss_koleo: sum_koleo / denom,
            loss_total: sum_total / denom,
            effective_rank: eval.effective_rank,
            toy_uap: eval.micro_ap,
        });
    }

    let final_eval = evaluate_probe(&encoder, &probe, config.probe_k)?;
    let final_probe = ProbeReport {
        micro_ap: final_eval.micro_ap,
        recall_at_1: final_eval.recall_at_1,
        mrr: final_eval.mrr,
        effective_rank: final_eval.effective_rank,
        max_min_ratio: final_eval.max_min_ratio,
        positive_sq_distances: final_eval.positive_sq,
        negative_sq_distances: final_eval.negative_sq,
    };

    Ok((
        encoder,
        TrainHistory {
            epochs: history,
            final_probe,
        },
    ))
}
