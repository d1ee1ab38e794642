//! Experiment configuration files: TOML tables for the encoder, fusion
//! layer, predictor, training, and experiment shape, with environment
//! overrides under the `SQKT_` prefix (`SQKT_TRAIN__LEARNING_RATE=1e-3`
//! overrides `[train] learning_rate`).

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::CourseId;
use crate::encoders::{EncoderBackend, EncoderConfig, FrozenCache};
use crate::model::{ModelConfig, PredictorConfig, VariantId};
use crate::train::{ExperimentKind, ExperimentSpec, GridSpec, TrainConfig};

pub const ENV_PREFIX: &str = "SQKT_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub backend: String,
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub max_len: usize,
    pub ff_dim: Option<usize>,
    pub decoder_layers: usize,
    pub frozen_cache: Option<PathBuf>,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let d = EncoderConfig::default();
        Self {
            backend: "trainable".into(),
            dim: d.dim,
            layers: d.layers,
            heads: d.heads,
            max_len: d.max_len,
            ff_dim: None,
            decoder_layers: d.decoder_layers,
            frozen_cache: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub dim: usize,
    pub margin: f64,
}

impl Default for FusionSection {
    fn default() -> Self {
        Self {
            dim: 512,
            margin: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub n_max: usize,
    pub positional: bool,
    pub dropout: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = PredictorConfig::default();
        Self {
            layers: p.layers,
            heads: p.heads,
            ff_dim: p.ff_dim,
            n_max: p.n_max,
            positional: p.positional,
            dropout: 0.1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: Option<f64>,
    pub lambda: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub grid: Option<GridSpec>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            dropout: None,
            lambda: t.lambda,
            max_epochs: t.max_epochs,
            patience: t.patience,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: String,
    pub train_courses: Vec<String>,
    pub test_courses: Vec<String>,
    pub variants: Vec<String>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: "in_domain".into(),
            train_courses: Vec::new(),
            test_courses: Vec::new(),
            variants: vec!["full".into()],
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub encoder: EncoderSection,
    pub fusion: FusionSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub experiment: ExperimentSection,
}

impl FileConfig {
    pub fn from_str_with_env(text: &str) -> Result<Self, ConfigError> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        apply_env_overrides(&mut value, std::env::vars());
        value
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_with_env(&text)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            encoder: EncoderConfig {
                dim: self.encoder.dim,
                layers: self.encoder.layers,
                heads: self.encoder.heads,
                ff_dim: self.encoder.ff_dim.unwrap_or(self.encoder.dim * 4),
                max_len: self.encoder.max_len,
                decoder_layers: self.encoder.decoder_layers,
            },
            fusion: crate::fusion::FusionConfig {
                dim: self.fusion.dim,
                margin: self.fusion.margin,
            },
            predictor: PredictorConfig {
                layers: self.model.layers,
                heads: self.model.heads,
                dim: self.fusion.dim,
                ff_dim: self.model.ff_dim,
                n_max: self.model.n_max,
                positional: self.model.positional,
            },
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            dropout: self.train.dropout.unwrap_or(self.model.dropout),
            lambda: self.train.lambda,
            max_epochs: self.train.max_epochs,
            patience: self.train.patience,
            seed,
            grid: self.train.grid.clone(),
        }
    }

    pub fn backend(&self) -> Result<EncoderBackend, ConfigError> {
        match self.encoder.backend.as_str() {
            "trainable" => Ok(EncoderBackend::Trainable),
            "frozen" => {
                let path = self.encoder.frozen_cache.as_ref().ok_or_else(|| {
                    ConfigError::Invalid(
                        "encoder.backend = \"frozen\" needs encoder.frozen_cache".into(),
                    )
                })?;
                let cache = FrozenCache::load(path)
                    .map_err(|e| ConfigError::Invalid(format!("frozen cache: {e}")))?;
                Ok(EncoderBackend::Frozen(cache))
            }
            other => Err(ConfigError::Invalid(format!(
                "unknown encoder backend {other:?}"
            ))),
        }
    }

    /// Variant names, with `table3` / `table4` presets expanded.
    pub fn variant_ids(&self) -> Result<Vec<VariantId>, ConfigError> {
        let mut out = Vec::new();
        for name in &self.experiment.variants {
            match name.as_str() {
                "table3" => out.extend(VariantId::TABLE3),
                "table4" => out.extend(VariantId::TABLE4),
                other => out.push(VariantId::parse(other).ok_or_else(|| {
                    ConfigError::Invalid(format!("unknown variant {other:?}"))
                })?),
            }
        }
        out.dedup();
        Ok(out)
    }

    pub fn experiment_spec(&self) -> Result<ExperimentSpec, ConfigError> {
        let kind = match self.experiment.kind.as_str() {
            "in_domain" => ExperimentKind::InDomain,
            "cross_domain" => ExperimentKind::CrossDomain,
            "ablation" => ExperimentKind::Ablation,
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown experiment kind {other:?}"
                )))
            }
        };
        Ok(ExperimentSpec {
            kind,
            train_courses: self
                .experiment
                .train_courses
                .iter()
                .map(|c| CourseId::new(c.clone()))
                .collect(),
            test_courses: self
                .experiment
                .test_courses
                .iter()
                .map(|c| CourseId::new(c.clone()))
                .collect(),
            variants: self.variant_ids()?,
            seeds: self.experiment.seeds.clone(),
        })
    }
}

/// Folds `SQKT_SECTION__KEY=value` environment pairs into the parsed tree.
/// Values parse as TOML scalars/arrays, falling back to plain strings.
fn apply_env_overrides(
    value: &mut toml::Value,
    vars: impl Iterator<Item = (String, String)>,
) {
    for (key, raw) in vars {
        let Some(rest) = key.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let Some((section, field)) = rest.split_once("__") else {
            continue;
        };
        let section = section.to_lowercase();
        let field = field.to_lowercase();
        let parsed: toml::Value = raw
            .parse::<toml::Value>()
            .unwrap_or(toml::Value::String(raw.clone()));
        if let Some(table) = value.as_table_mut() {
            let entry = table
                .entry(section)
                .or_insert_with(|| toml::Value::Table(Default::default()));
            if let Some(sub) = entry.as_table_mut() {
                sub.insert(field, parsed);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reported_best_configuration() {
        let cfg = FileConfig::from_str_with_env("").unwrap();
        let t = cfg.train_config(0);
        assert_eq!(t.learning_rate, 3e-5);
        assert_eq!(t.batch_size, 16);
        assert_eq!(t.dropout, 0.1);
        assert_eq!(t.lambda, 1.0);
        let m = cfg.model_config();
        assert_eq!(m.predictor.layers, 6);
        assert_eq!(m.fusion.dim, 512);
        assert!(m.validate().is_ok());
    }

    #[test]
    fn sections_parse_and_compose() {
        let text = r#"
[encoder]
dim = 32
layers = 1
heads = 2
max_len = 64

[fusion]
dim = 64
margin = 0.5

[model]
layers = 3
heads = 4
ff_dim = 128

[train]
learning_rate = 1e-3
batch_size = 8

[experiment]
kind = "ablation"
train_courses = ["course-0"]
test_courses = ["course-0"]
variants = ["table4"]
seeds = [1, 2, 3]
"#;
        let cfg = FileConfig::from_str_with_env(text).unwrap();
        let m = cfg.model_config();
        assert_eq!(m.encoder.dim, 32);
        assert_eq!(m.fusion.margin, 0.5);
        assert_eq!(m.predictor.dim, 64);
        assert_eq!(m.predictor.layers, 3);
        let spec = cfg.experiment_spec().unwrap();
        assert_eq!(spec.variants.len(), 3);
        assert_eq!(spec.seeds, vec![1, 2, 3]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FileConfig::from_str_with_env("[train]\nlearning_rte = 1e-3").is_err());
    }

    #[test]
    fn env_overrides_apply() {
        let mut value: toml::Value = toml::from_str("[train]\nlearning_rate = 1e-5").unwrap();
        apply_env_overrides(
            &mut value,
            vec![
                ("SQKT_TRAIN__LEARNING_RATE".to_string(), "0.001".to_string()),
                ("SQKT_MODEL__LAYERS".to_string(), "2".to_string()),
                ("UNRELATED".to_string(), "x".to_string()),
            ]
            .into_iter(),
        );
        let cfg: FileConfig = value.try_into().unwrap();
        assert_eq!(cfg.train.learning_rate, 0.001);
        assert_eq!(cfg.model.layers, 2);
    }

    #[test]
    fn bad_backend_and_variant_are_rejected() {
        let cfg = FileConfig::from_str_with_env("[encoder]\nbackend = \"quantum\"").unwrap();
        assert!(cfg.backend().is_err());
        let cfg =
            FileConfig::from_str_with_env("[experiment]\nvariants = [\"nope\"]").unwrap();
        assert!(cfg.variant_ids().is_err());
        let cfg = FileConfig::from_str_with_env("[encoder]\nbackend = \"frozen\"").unwrap();
        assert!(cfg.backend().is_err());
    }
}
