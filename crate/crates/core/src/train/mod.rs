//! Optimization loop: Adam over the composite objective with early stopping
//! on validation AUC, line-oriented JSON training logs, and a runtime
//! no-leakage assertion over every batch.

mod experiment;
mod metrics;

pub use experiment::{
    grid_search, metrics_report, run_experiment, summary_csv, AggregateMetrics, ExperimentKind,
    ExperimentReport, ExperimentSpec, GridSpec, MetricsReport, PredictionRecord, SeedReport,
    VariantReport,
};
pub use metrics::{accuracy, auc, f1, median, F1Result, MetricError};

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, LabeledInstance, StudentId};
use crate::model::{LossBundle, ModelError, SqktModel};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training instances")]
    EmptyTrainingSet,
    #[error("non-finite loss at step {step}; training diverged")]
    Diverged { step: usize },
    #[error("leakage: student {0:?} from the forbidden set appeared in a training batch")]
    Leakage(StudentId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Training hyperparameters. Defaults follow the reported best
/// configuration: lr 3e-5, batch 16, dropout 0.1, auxiliary weight 1.0.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    /// Weight of the triplet loss; multiplies the variant's own weight.
    pub lambda: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub grid: Option<GridSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-5,
            batch_size: 16,
            dropout: 0.1,
            lambda: 1.0,
            max_epochs: 50,
            patience: 10,
            seed: 0,
            grid: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate <= 0.0 {
            return Err(TrainError::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(TrainError::Config(
                "batch_size and max_epochs must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TrainError::Config("dropout must be in [0,1)".into()));
        }
        if self.lambda < 0.0 {
            return Err(TrainError::Config("lambda must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TrainEvent {
    Step {
        step: usize,
        l_pred: f64,
        l_question: f64,
        l_triplet: f64,
        l_total: f64,
    },
    Epoch {
        epoch: usize,
        train_loss_mean: f64,
        val_auc: Option<f64>,
    },
    EarlyStop {
        epoch: usize,
        best_val_auc: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub steps: usize,
    pub best_val_auc: Option<f64>,
    pub final_train_loss: f64,
    /// Loss bundles for the first steps; determinism checks compare these.
    pub loss_trajectory: Vec<LossBundle>,
}

const TRAJECTORY_CAP: usize = 64;

/// Trains in place. `forbidden_students` (the test split) must never appear
/// in a batch; every batch is checked at runtime. Early stopping watches
/// validation AUC with the configured patience and restores the best
/// parameters afterward. Deterministic given the config seed.
pub fn train(
    model: &mut SqktModel,
    corpus: &Corpus,
    train_instances: &[LabeledInstance],
    val_instances: &[LabeledInstance],
    cfg: &TrainConfig,
    forbidden_students: &BTreeSet<StudentId>,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    if train_instances.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..train_instances.len()).collect();
    let mut step = 0usize;
    let mut trajectory = Vec::new();
    let mut best_val: Option<f64> = None;
    let mut best_params: Option<crate::nn::ParamStore> = None;
    let mut patience_left = cfg.patience;
    let mut epochs_run = 0usize;
    let mut last_epoch_loss = f64::NAN;

    let emit = |event: &TrainEvent, log: &mut Option<&mut dyn Write>| -> Result<(), TrainError> {
        if let Some(w) = log.as_deref_mut() {
            serde_json::to_writer(&mut *w, event).map_err(std::io::Error::other)?;
            writeln!(w)?;
        }
        Ok(())
    };

    'epochs: for epoch in 0..cfg.max_epochs {
        epochs_run = epoch + 1;
        indices.shuffle(&mut rng);
        let mut epoch_losses = Vec::new();
        for chunk in indices.chunks(cfg.batch_size) {
            let batch: Vec<LabeledInstance> =
                chunk.iter().map(|&i| train_instances[i].clone()).collect();
            for inst in &batch {
                if forbidden_students.contains(&inst.student_id) {
                    return Err(TrainError::Leakage(inst.student_id.clone()));
                }
            }
            let bundle =
                model.train_step(corpus, &batch, cfg.learning_rate, cfg.dropout, &mut rng)?;
            if !bundle.l_total.is_finite() {
                return Err(TrainError::Diverged { step });
            }
            step += 1;
            epoch_losses.push(bundle.l_total);
            if trajectory.len() < TRAJECTORY_CAP {
                trajectory.push(bundle);
            }
            emit(
                &TrainEvent::Step {
                    step,
                    l_pred: bundle.l_pred,
                    l_question: bundle.l_question,
                    l_triplet: bundle.l_triplet,
                    l_total: bundle.l_total,
                },
                &mut log,
            )?;
        }
        last_epoch_loss = epoch_losses.iter().sum::<f64>() / epoch_losses.len() as f64;

        let mut val_auc = None;
        if !val_instances.is_empty() {
            let scores = model.predict_batch(corpus, val_instances)?;
            let labels: Vec<bool> = val_instances.iter().map(|i| i.label.is_success()).collect();
            // Single-class validation sets fall back to accuracy so early
            // stopping still has a signal.
            let metric = match auc(&scores, &labels) {
                Ok(a) => a,
                Err(MetricError::UndefinedMetric(_)) => accuracy(&scores, &labels, 0.5)?,
                Err(e) => return Err(e.into()),
            };
            val_auc = Some(metric);
            if best_val.map_or(true, |b| metric > b + 1e-9) {
                best_val = Some(metric);
                best_params = Some(model.store.clone());
                patience_left = cfg.patience;
            } else if patience_left <= 1 {
                emit(
                    &TrainEvent::EarlyStop {
                        epoch: epoch + 1,
                        best_val_auc: best_val.unwrap_or(f64::NAN),
                    },
                    &mut log,
                )?;
                emit(
                    &TrainEvent::Epoch {
                        epoch: epoch + 1,
                        train_loss_mean: last_epoch_loss,
                        val_auc,
                    },
                    &mut log,
                )?;
                break 'epochs;
            } else {
                patience_left -= 1;
            }
        }
        emit(
            &TrainEvent::Epoch {
                epoch: epoch + 1,
                train_loss_mean: last_epoch_loss,
                val_auc,
            },
            &mut log,
        )?;
    }

    if let Some(best) = best_params {
        model.store = best;
    }
    Ok(TrainReport {
        epochs_run,
        steps: step,
        best_val_auc: best_val,
        final_train_loss: last_epoch_loss,
        loss_trajectory: trajectory,
    })
}

/// Evaluation helper: probabilities and boolean labels for a set of
/// instances.
pub fn score_instances(
    model: &mut SqktModel,
    corpus: &Corpus,
    instances: &[LabeledInstance],
) -> Result<(Vec<f64>, Vec<bool>), TrainError> {
    let scores = model.predict_batch(corpus, instances)?;
    let labels = instances.iter().map(|i| i.label.is_success()).collect();
    Ok((scores, labels))
}
