//! JSON run configuration.
//!
//! Every field has a default, unknown keys are rejected, and
//! parse -> serialize -> parse is the identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::scorenorm::ScoreNormConfig;
use crate::toy::{AugmentParams, EncoderKind, Schedule, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum EncoderSpec {
    Linear,
    Mlp { hidden: usize },
}

impl From<EncoderSpec> for EncoderKind {
    fn from(spec: EncoderSpec) -> Self {
        match spec {
            EncoderSpec::Linear => EncoderKind::Linear,
            EncoderSpec::Mlp { hidden } => EncoderKind::Mlp { hidden },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub sources: usize,
    pub input_dim: usize,
    pub descriptor_dim: usize,
    pub batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub schedule: Schedule,
    pub seed: u64,
    pub tau: f64,
    pub lambda: f64,
    pub augment: AugmentParams,
    pub probe_augment: AugmentParams,
    pub encoder: EncoderSpec,
    pub holdout_fraction: f64,
    pub probe_k: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            sources: t.sources,
            input_dim: t.input_dim,
            descriptor_dim: t.descriptor_dim,
            batch: t.batch,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            schedule: t.schedule,
            seed: t.seed,
            tau: t.loss.tau,
            lambda: t.loss.lambda,
            augment: t.augment,
            probe_augment: t.probe_augment,
            encoder: EncoderSpec::Linear,
            holdout_fraction: t.holdout_fraction,
            probe_k: t.probe_k,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            sources: self.sources,
            input_dim: self.input_dim,
            descriptor_dim: self.descriptor_dim,
            batch: self.batch,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            schedule: self.schedule,
            seed: self.seed,
            loss: LossConfig {
                tau: self.tau,
                lambda: self.lambda,
            },
            augment: self.augment,
            probe_augment: self.probe_augment,
            encoder: self.encoder.into(),
            holdout_fraction: self.holdout_fraction,
            probe_k: self.probe_k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Candidates retrieved per query.
    pub k: usize,
    /// Histogram bin count over the squared-distance range.
    pub histogram_bins: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            k: 10,
            histogram_bins: 50,
        }
    }
}

/// The top-level JSON document driving CLI runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: TrainSection,
    pub score_norm: ScoreNormConfig,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn from_path<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_losslessly() {
        let config = RunConfig::default();
        let json = config.to_json_pretty();
        let parsed = RunConfig::from_json(&json).unwrap();
        assert_eq!(parsed, config);
        assert_eq!(parsed.to_json_pretty(), json);
    }

    #[test]
    fn empty_document_uses_defaults() {
        let parsed = RunConfig::from_json("{}").unwrap();
        assert_eq!(parsed, RunConfig::default());
        assert_eq!(parsed.train.tau, 0.05);
        assert_eq!(parsed.train.lambda, 30.0);
        assert_eq!(parsed.score_norm.n, 1);
        assert_eq!(parsed.score_norm.n_end, 3);
        assert_eq!(parsed.score_norm.beta, 1.0);
    }

    #[test]
    fn unknown_keys_rejected_with_field_name() {
        let err = RunConfig::from_json(r#"{"train": {"bogus_field": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("bogus_field"), "{err}");
        let err = RunConfig::from_json(r#"{"not_a_section": {}}"#).unwrap_err();
        assert!(err.to_string().contains("not_a_section"), "{err}");
    }

    #[test]
    fn partial_overrides_apply() {
        let parsed = RunConfig::from_json(
            r#"{"train": {"lambda": 3.0, "encoder": {"type": "mlp", "hidden": 48}}}"#,
        )
        .unwrap();
        assert_eq!(parsed.train.lambda, 3.0);
        assert_eq!(
            parsed.train.encoder,
            EncoderSpec::Mlp { hidden: 48 }
        );
        assert_eq!(parsed.train.tau, 0.05);
    }
}
