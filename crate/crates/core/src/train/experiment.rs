//! Config-driven experiment runner: in-domain, cross-domain, and ablation
//! studies over seeded, student-disjoint splits, with median aggregation
//! across seeds and table-style summaries.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_instances, compute_thresholds, split_by_student, Corpus, CourseId, LabeledInstance,
    StudentId,
};
use crate::encoders::EncoderBackend;
use crate::model::{ModelConfig, SqktModel, VariantId};

use super::metrics::{accuracy, auc, f1, median, MetricError};
use super::{train, score_instances, TrainConfig, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    InDomain,
    CrossDomain,
    Ablation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub train_courses: Vec<CourseId>,
    pub test_courses: Vec<CourseId>,
    pub variants: Vec<VariantId>,
    pub seeds: Vec<u64>,
}

impl ExperimentSpec {
    pub fn validate(&self, corpus: &Corpus) -> Result<(), TrainError> {
        if self.seeds.is_empty() {
            return Err(TrainError::Config("at least one seed required".into()));
        }
        if self.variants.is_empty() {
            return Err(TrainError::Config("at least one variant required".into()));
        }
        if self.train_courses.is_empty() || self.test_courses.is_empty() {
            return Err(TrainError::Config("course lists must be nonempty".into()));
        }
        let known = corpus.courses();
        for c in self.train_courses.iter().chain(&self.test_courses) {
            if !known.contains(c) {
                return Err(TrainError::Config(format!("unknown course {c:?}")));
            }
        }
        match self.kind {
            ExperimentKind::CrossDomain => {
                let train: BTreeSet<_> = self.train_courses.iter().collect();
                if self.test_courses.iter().any(|c| train.contains(c)) {
                    return Err(TrainError::Config(
                        "cross-domain train and test courses must be disjoint".into(),
                    ));
                }
            }
            ExperimentKind::InDomain | ExperimentKind::Ablation => {
                if self.train_courses != self.test_courses {
                    return Err(TrainError::Config(
                        "in-domain experiments train and test on the same courses".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub score: f64,
    pub label: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CourseMetrics {
    pub auc: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub n_instances: usize,
    pub positive_rate: f64,
}

/// Metrics over one prediction set; all three scores come from the same
/// predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub f1_zero_denominator: bool,
    pub n_instances: usize,
    pub positive_rate: f64,
    pub per_course: BTreeMap<String, CourseMetrics>,
    pub predictions: Vec<PredictionRecord>,
}

pub fn metrics_report(
    scores: &[f64],
    labels: &[bool],
    courses: &[CourseId],
) -> Result<MetricsReport, MetricError> {
    let auc_v = auc(scores, labels)?;
    let acc_v = accuracy(scores, labels, 0.5)?;
    let f1_v = f1(scores, labels, 0.5)?;
    let mut per_course = BTreeMap::new();
    let distinct: BTreeSet<&CourseId> = courses.iter().collect();
    if distinct.len() > 1 {
        for course in distinct {
            let idx: Vec<usize> = courses
                .iter()
                .enumerate()
                .filter(|(_, c)| *c == course)
                .map(|(i, _)| i)
                .collect();
            let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
            // per-course slices may be single-class; skip those rather than
            // fail the whole report
            if let Ok(course_auc) = auc(&s, &l) {
                per_course.insert(
                    course.as_str().to_string(),
                    CourseMetrics {
                        auc: course_auc,
                        accuracy: accuracy(&s, &l, 0.5)?,
                        f1: f1(&s, &l, 0.5)?.value,
                        n_instances: s.len(),
                        positive_rate: l.iter().filter(|&&x| x).count() as f64 / l.len() as f64,
                    },
                );
            }
        }
    }
    Ok(MetricsReport {
        auc: auc_v,
        accuracy: acc_v,
        f1: f1_v.value,
        f1_zero_denominator: f1_v.zero_denominator,
        n_instances: scores.len(),
        positive_rate: labels.iter().filter(|&&x| x).count() as f64 / labels.len() as f64,
        per_course,
        predictions: scores
            .iter()
            .zip(labels)
            .map(|(&score, &label)| PredictionRecord {
                score,
                label: label as u8,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub metrics: MetricsReport,
    pub epochs_run: usize,
    pub best_val_auc: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub auc: f64,
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: VariantId,
    pub label: String,
    pub per_seed: Vec<SeedReport>,
    /// Median over seeds, metric by metric.
    pub median: AggregateMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub train_courses: Vec<CourseId>,
    pub test_courses: Vec<CourseId>,
    pub variants: Vec<VariantReport>,
    /// Wall-clock stamp; excluded from idempotency comparisons.
    pub generated_at_unix: u64,
}

impl ExperimentReport {
    pub fn variant(&self, id: VariantId) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.variant == id)
    }
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// The per-seed data splits of one experiment run.
struct RunData {
    train: Vec<LabeledInstance>,
    val: Vec<LabeledInstance>,
    test: Vec<LabeledInstance>,
    forbidden: BTreeSet<StudentId>,
}

fn prepare_run(
    spec: &ExperimentSpec,
    corpus: &Corpus,
    seed: u64,
) -> Result<RunData, TrainError> {
    let train_courses: BTreeSet<CourseId> = spec.train_courses.iter().cloned().collect();
    let test_courses: BTreeSet<CourseId> = spec.test_courses.iter().cloned().collect();
    match spec.kind {
        ExperimentKind::InDomain | ExperimentKind::Ablation => {
            let sub = corpus.restricted_to_courses(&train_courses);
            let split = split_by_student(&sub, (8, 1, 1), seed)?;
            // Thresholds from the training split only, to avoid leakage.
            let thresholds = compute_thresholds(&sub, Some(&split.train))?;
            Ok(RunData {
                train: build_instances(&sub, &split.train, &thresholds),
                val: build_instances(&sub, &split.val, &thresholds),
                test: build_instances(&sub, &split.test, &thresholds),
                forbidden: split.test,
            })
        }
        ExperimentKind::CrossDomain => {
            let train_sub = corpus.restricted_to_courses(&train_courses);
            let test_sub = corpus.restricted_to_courses(&test_courses);
            // Carve a validation share out of the training courses.
            let split = split_by_student(&train_sub, (9, 1, 0), seed)?;
            let thresholds = compute_thresholds(&train_sub, Some(&split.train))?;
            // Test labels use the test course's own statistics: the label
            // definition belongs to the course.
            let test_thresholds = compute_thresholds(&test_sub, None)?;
            let test_students: BTreeSet<StudentId> =
                test_sub.student_ids().cloned().collect();
            Ok(RunData {
                train: build_instances(&train_sub, &split.train, &thresholds),
                val: build_instances(&train_sub, &split.val, &thresholds),
                test: build_instances(&test_sub, &test_students, &test_thresholds),
                forbidden: test_students,
            })
        }
    }
}

fn run_one(
    spec: &ExperimentSpec,
    corpus: &Corpus,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    variant_id: VariantId,
    seed: u64,
) -> Result<SeedReport, TrainError> {
    let data = prepare_run(spec, corpus, seed)?;
    if data.train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let mut variant = variant_id.variant();
    variant.triplet_weight *= train_cfg.lambda;
    let mut model = SqktModel::new(
        model_cfg.clone(),
        variant,
        EncoderBackend::Trainable,
        seed,
    )
    .map_err(TrainError::Model)?;
    let cfg = TrainConfig {
        seed,
        ..train_cfg.clone()
    };
    let report = train(
        &mut model,
        corpus,
        &data.train,
        &data.val,
        &cfg,
        &data.forbidden,
        None,
    )?;
    let (scores, labels) = score_instances(&mut model, corpus, &data.test)?;
    let courses: Vec<CourseId> = data
        .test
        .iter()
        .map(|inst| {
            corpus
                .problem(&inst.target_problem_id)
                .map(|p| p.course_id.clone())
                .unwrap_or_else(|| CourseId::from("unknown"))
        })
        .collect();
    Ok(SeedReport {
        seed,
        metrics: metrics_report(&scores, &labels, &courses)?,
        epochs_run: report.epochs_run,
        best_val_auc: report.best_val_auc,
    })
}

/// Runs every (variant, seed) combination, in parallel across runs, and
/// aggregates per-variant medians. Reports come back in the spec's variant
/// order; per-seed reports in seed order.
pub fn run_experiment(
    spec: &ExperimentSpec,
    corpus: &Corpus,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<ExperimentReport, TrainError> {
    spec.validate(corpus)?;
    train_cfg.validate()?;
    model_cfg.validate().map_err(TrainError::Model)?;

    let jobs: Vec<(VariantId, u64)> = spec
        .variants
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<(VariantId, u64, Result<SeedReport, TrainError>)> = jobs
        .par_iter()
        .map(|&(variant, seed)| {
            (
                variant,
                seed,
                run_one(spec, corpus, model_cfg, train_cfg, variant, seed),
            )
        })
        .collect();

    let mut variants = Vec::new();
    for &variant in &spec.variants {
        let mut per_seed = Vec::new();
        for &seed in &spec.seeds {
            let found = results
                .iter()
                .find(|(v, s, _)| *v == variant && *s == seed)
                .expect("every job ran");
            match &found.2 {
                Ok(report) => per_seed.push(report.clone()),
                Err(e) => {
                    return Err(TrainError::Config(format!(
                        "run {variant:?} seed {seed} failed: {e}"
                    )))
                }
            }
        }
        let aucs: Vec<f64> = per_seed.iter().map(|r| r.metrics.auc).collect();
        let accs: Vec<f64> = per_seed.iter().map(|r| r.metrics.accuracy).collect();
        let f1s: Vec<f64> = per_seed.iter().map(|r| r.metrics.f1).collect();
        variants.push(VariantReport {
            variant,
            label: variant.display_label().to_string(),
            median: AggregateMetrics {
                auc: median(&aucs),
                accuracy: median(&accs),
                f1: median(&f1s),
            },
            per_seed,
        });
    }
    Ok(ExperimentReport {
        kind: spec.kind,
        train_courses: spec.train_courses.clone(),
        test_courses: spec.test_courses.clone(),
        variants,
        generated_at_unix: now_unix(),
    })
}

/// Summary CSV in the ablation-table layout: one row per variant, metric
/// columns in percent.
pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("model,auc_pct,acc_pct,f1_pct\n");
    for v in &report.variants {
        out.push_str(&format!(
            "\"{}\",{:.1},{:.1},{:.1}\n",
            v.label,
            v.median.auc * 100.0,
            v.median.accuracy * 100.0,
            v.median.f1 * 100.0
        ));
    }
    out
}

/// Hyperparameter grid; exhaustive product, lexicographic order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub learning_rate: Vec<f64>,
    pub dropout: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub lambda: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            learning_rate: vec![1e-5, 3e-5, 1e-4],
            dropout: vec![0.1, 0.2],
            batch_size: vec![8, 16],
            lambda: vec![0.5, 1.0],
        }
    }
}

impl GridSpec {
    pub fn configs(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &lr in &self.learning_rate {
            for &dropout in &self.dropout {
                for &batch_size in &self.batch_size {
                    for &lambda in &self.lambda {
                        out.push(TrainConfig {
                            learning_rate: lr,
                            dropout,
                            batch_size,
                            lambda,
                            grid: None,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// Exhaustive grid search scored by validation AUC. Ties keep the earlier
/// (lexicographically first) configuration.
pub fn grid_search(
    grid: &GridSpec,
    corpus: &Corpus,
    spec: &ExperimentSpec,
    model_cfg: &ModelConfig,
    base: &TrainConfig,
) -> Result<(TrainConfig, f64), TrainError> {
    let configs = grid.configs(base);
    if configs.is_empty() {
        return Err(TrainError::Config("empty grid".into()));
    }
    let seed = *spec.seeds.first().unwrap_or(&0);
    let data = prepare_run(spec, corpus, seed)?;
    let variant_id = *spec.variants.first().unwrap_or(&VariantId::Full);

    let scored: Vec<(usize, Result<f64, TrainError>)> = configs
        .par_iter()
        .enumerate()
        .map(|(idx, cfg)| {
            let run = || -> Result<f64, TrainError> {
                let mut variant = variant_id.variant();
                variant.triplet_weight *= cfg.lambda;
                let mut model = SqktModel::new(
                    model_cfg.clone(),
                    variant,
                    EncoderBackend::Trainable,
                    seed,
                )?;
                let cfg = TrainConfig { seed, ..cfg.clone() };
                let report = train(
                    &mut model,
                    corpus,
                    &data.train,
                    &data.val,
                    &cfg,
                    &data.forbidden,
                    None,
                )?;
                // With an empty validation set fall back to training fit.
                match report.best_val_auc {
                    Some(v) => Ok(v),
                    None => {
                        let (scores, labels) =
                            score_instances(&mut model, corpus, &data.train)?;
                        Ok(auc(&scores, &labels)?)
                    }
                }
            };
            (idx, run())
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (idx, result) in scored {
        let value = result?;
        let better = match best {
            None => true,
            Some((_, b)) => value > b,
        };
        if better {
            best = Some((idx, value));
        }
    }
    let (idx, score) = best.expect("nonempty grid");
    Ok((configs[idx].clone(), score))
}
