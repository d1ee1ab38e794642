//! Command implementations. Every failure maps to a documented exit code
//! and a single machine-readable JSON line on stderr.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;

use sqkt_core::config::{ConfigError, FileConfig};
use sqkt_core::corpus::{
    build_instances, compute_thresholds, generate_synthetic_corpus, label_outcome, load_corpus,
    load_splits, save_corpus, save_splits, split_by_student, Corpus, CorpusError, GenConfig,
};
use sqkt_core::model::{load_checkpoint, save_checkpoint, SqktModel, VariantId};
use sqkt_core::skills::Extractor;
use sqkt_core::train::{
    metrics_report, run_experiment, summary_csv, train, ExperimentSpec, TrainError,
};

use crate::{Command, EXIT_CONFIG, EXIT_CONFIG_MISMATCH, EXIT_DATA, EXIT_IO, EXIT_RUNTIME};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn new(code: u8, kind: &'static str, message: impl ToString) -> Self {
        Self {
            code,
            kind,
            message: message.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(EXIT_IO, "io", e)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(inner) => CliError::new(EXIT_IO, "io", inner),
            CorpusError::InvalidGenConfig(_) => CliError::new(EXIT_CONFIG, "config", e),
            other => CliError::new(EXIT_DATA, "data", other),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(inner) => CliError::new(EXIT_IO, "io", inner),
            other => CliError::new(EXIT_CONFIG, "config", other),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        CliError::new(EXIT_RUNTIME, "train", e)
    }
}

impl From<sqkt_core::model::ModelError> for CliError {
    fn from(e: sqkt_core::model::ModelError) -> Self {
        CliError::new(EXIT_RUNTIME, "model", e)
    }
}

fn resolve(workdir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        workdir.join(path)
    }
}

fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    if !path.exists() {
        return Err(CliError::new(
            EXIT_IO,
            "io",
            format!("corpus file not found: {}", path.display()),
        ));
    }
    Ok(load_corpus(path, Extractor::bundled())?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::new(EXIT_RUNTIME, "serialize", e))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn dispatch(workdir: PathBuf, command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth { config, seed, out } => synth(
            &resolve(&workdir, &config),
            seed,
            &resolve(&workdir, &out),
        ),
        Command::Extract { input } => extract(input.map(|p| resolve(&workdir, &p))),
        Command::Label { corpus, splits, out } => label(
            &resolve(&workdir, &corpus),
            splits.map(|p| resolve(&workdir, &p)),
            &resolve(&workdir, &out),
        ),
        Command::Split { corpus, seed, out } => split(
            &resolve(&workdir, &corpus),
            seed,
            &resolve(&workdir, &out),
        ),
        Command::Train {
            corpus,
            splits,
            config,
            seed,
            out,
        } => train_cmd(
            &resolve(&workdir, &corpus),
            &resolve(&workdir, &splits),
            &resolve(&workdir, &config),
            seed,
            &resolve(&workdir, &out),
        ),
        Command::Eval {
            ckpt,
            corpus,
            splits,
            config,
            out,
        } => eval_cmd(
            &resolve(&workdir, &ckpt),
            &resolve(&workdir, &corpus),
            &resolve(&workdir, &splits),
            config.map(|p| resolve(&workdir, &p)),
            &resolve(&workdir, &out),
        ),
        Command::Ablate {
            corpus,
            config,
            variants,
            seeds,
            out,
        } => ablate(
            &resolve(&workdir, &corpus),
            &resolve(&workdir, &config),
            variants,
            seeds,
            &resolve(&workdir, &out),
        ),
        Command::Report { input, plots } => report(
            &resolve(&workdir, &input),
            &resolve(&workdir, &plots),
        ),
    }
}

fn synth(config: &Path, seed: u64, out: &Path) -> Result<(), CliError> {
    if !config.exists() {
        return Err(CliError::new(
            EXIT_IO,
            "io",
            format!("config file not found: {}", config.display()),
        ));
    }
    let gen = GenConfig::from_file(config)?;
    let corpus = generate_synthetic_corpus(&gen, seed)?;
    save_corpus(&corpus, out)?;
    println!(
        "{}",
        serde_json::json!({
            "students": corpus.n_students(),
            "problems": corpus.n_problems(),
            "out": out.display().to_string(),
        })
    );
    Ok(())
}

fn extract(input: Option<PathBuf>) -> Result<(), CliError> {
    let text = match input {
        Some(path) => std::fs::read_to_string(&path).map_err(|e| {
            CliError::new(EXIT_IO, "io", format!("{}: {e}", path.display()))
        })?,
        None => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf
        }
    };
    let skills = Extractor::bundled().extract_from_question(&text);
    println!(
        "{}",
        serde_json::to_string(&skills).map_err(|e| CliError::new(EXIT_RUNTIME, "serialize", e))?
    );
    Ok(())
}

#[derive(Serialize)]
struct LabelFile {
    thresholds: std::collections::BTreeMap<String, u32>,
    labels: Vec<LabelRow>,
}

#[derive(Serialize)]
struct LabelRow {
    student_id: String,
    problem_id: String,
    label: u8,
}

fn label(corpus_path: &Path, splits: Option<PathBuf>, out: &Path) -> Result<(), CliError> {
    let corpus = read_corpus(corpus_path)?;
    let restrict = match splits {
        Some(path) => Some(load_splits(&path)?.train),
        None => None,
    };
    let thresholds = compute_thresholds(&corpus, restrict.as_ref())?;
    let mut labels = Vec::new();
    for (student, groups) in corpus.students() {
        for g in groups {
            let Some(problem) = corpus.problem(&g.problem_id) else {
                continue;
            };
            let t = thresholds[&problem.course_id];
            labels.push(LabelRow {
                student_id: student.as_str().to_string(),
                problem_id: g.problem_id.as_str().to_string(),
                label: label_outcome(&g.submissions, t).is_success() as u8,
            });
        }
    }
    let file = LabelFile {
        thresholds: thresholds
            .into_iter()
            .map(|(c, t)| (c.as_str().to_string(), t))
            .collect(),
        labels,
    };
    write_json(out, &file)
}

fn split(corpus_path: &Path, seed: u64, out: &Path) -> Result<(), CliError> {
    let corpus = read_corpus(corpus_path)?;
    let split = split_by_student(&corpus, (8, 1, 1), seed)?;
    save_splits(&split, out)?;
    println!(
        "{}",
        serde_json::json!({
            "train": split.train.len(),
            "val": split.val.len(),
            "test": split.test.len(),
        })
    );
    Ok(())
}

fn train_cmd(
    corpus_path: &Path,
    splits_path: &Path,
    config_path: &Path,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    let corpus = read_corpus(corpus_path)?;
    let splits = load_splits(splits_path)?;
    let file_cfg = FileConfig::from_file(config_path)?;
    let model_cfg = file_cfg.model_config();
    model_cfg.validate()?;
    let backend = file_cfg.backend()?;
    let train_cfg = file_cfg.train_config(seed);
    let variant_id = *file_cfg
        .variant_ids()?
        .first()
        .unwrap_or(&VariantId::Full);
    let mut variant = variant_id.variant();
    variant.triplet_weight *= train_cfg.lambda;

    let thresholds = compute_thresholds(&corpus, Some(&splits.train))?;
    let train_instances = build_instances(&corpus, &splits.train, &thresholds);
    let val_instances = build_instances(&corpus, &splits.val, &thresholds);

    std::fs::create_dir_all(out_dir)?;
    let mut model = SqktModel::new(model_cfg, variant, backend, seed)?;
    let mut log_file = std::fs::File::create(out_dir.join("train_log.jsonl"))?;
    let report = train(
        &mut model,
        &corpus,
        &train_instances,
        &val_instances,
        &train_cfg,
        &splits.test,
        Some(&mut log_file),
    )?;
    save_checkpoint(&model, &out_dir.join("model.ckpt"))?;
    write_json(&out_dir.join("train_report.json"), &report)?;
    println!(
        "{}",
        serde_json::json!({
            "epochs_run": report.epochs_run,
            "best_val_auc": report.best_val_auc,
            "checkpoint": out_dir.join("model.ckpt").display().to_string(),
        })
    );
    Ok(())
}

fn eval_cmd(
    ckpt_path: &Path,
    corpus_path: &Path,
    splits_path: &Path,
    config_path: Option<PathBuf>,
    out: &Path,
) -> Result<(), CliError> {
    if !ckpt_path.exists() {
        return Err(CliError::new(
            EXIT_IO,
            "io",
            format!("checkpoint not found: {}", ckpt_path.display()),
        ));
    }
    let mut model = load_checkpoint(ckpt_path, None)?;
    if let Some(config_path) = config_path {
        let file_cfg = FileConfig::from_file(&config_path)?;
        let expected = file_cfg.model_config();
        if expected != model.cfg {
            return Err(CliError::new(
                EXIT_CONFIG_MISMATCH,
                "config_mismatch",
                format!(
                    "checkpoint config differs from {} (encoder dim {} vs {}, fused dim {} vs {})",
                    config_path.display(),
                    model.cfg.encoder.dim,
                    expected.encoder.dim,
                    model.cfg.fusion.dim,
                    expected.fusion.dim,
                ),
            ));
        }
    }
    let corpus = read_corpus(corpus_path)?;
    let splits = load_splits(splits_path)?;
    let thresholds = compute_thresholds(&corpus, Some(&splits.train))?;
    let test_instances = build_instances(&corpus, &splits.test, &thresholds);
    if test_instances.is_empty() {
        return Err(CliError::new(EXIT_DATA, "data", "test split has no instances"));
    }
    let scores = model.predict_batch(&corpus, &test_instances)?;
    let labels: Vec<bool> = test_instances
        .iter()
        .map(|i| i.label.is_success())
        .collect();
    let courses: Vec<_> = test_instances
        .iter()
        .map(|i| {
            corpus
                .problem(&i.target_problem_id)
                .map(|p| p.course_id.clone())
                .unwrap_or_else(|| "unknown".into())
        })
        .collect();
    let metrics = metrics_report(&scores, &labels, &courses)
        .map_err(|e| CliError::new(EXIT_RUNTIME, "metrics", e))?;
    #[derive(Serialize)]
    struct EvalReport {
        metrics: sqkt_core::train::MetricsReport,
        n_test_students: usize,
        generated_at_unix: u64,
    }
    write_json(
        out,
        &EvalReport {
            metrics,
            n_test_students: splits.test.len(),
            generated_at_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
    )?;
    Ok(())
}

fn parse_seeds(raw: &str) -> Result<Vec<u64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| CliError::new(EXIT_CONFIG, "config", format!("bad seed {s:?}: {e}")))
        })
        .collect()
}

fn ablate(
    corpus_path: &Path,
    config_path: &Path,
    variants: Option<String>,
    seeds: Option<String>,
    out_dir: &Path,
) -> Result<(), CliError> {
    let corpus = read_corpus(corpus_path)?;
    let mut file_cfg = FileConfig::from_file(config_path)?;
    if let Some(raw) = variants {
        file_cfg.experiment.variants = raw.split(',').map(|s| s.trim().to_string()).collect();
    }
    if let Some(raw) = seeds {
        file_cfg.experiment.seeds = parse_seeds(&raw)?;
    }
    if file_cfg.experiment.train_courses.is_empty() {
        let courses: Vec<String> = corpus
            .courses()
            .into_iter()
            .map(|c| c.as_str().to_string())
            .collect();
        file_cfg.experiment.train_courses = courses.clone();
        file_cfg.experiment.test_courses = courses;
    }
    let mut spec: ExperimentSpec = file_cfg.experiment_spec()?;
    spec.kind = sqkt_core::train::ExperimentKind::Ablation;
    let model_cfg = file_cfg.model_config();
    let train_cfg = file_cfg.train_config(*spec.seeds.first().unwrap_or(&0));
    let report = run_experiment(&spec, &corpus, &model_cfg, &train_cfg)?;
    std::fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("ablation_report.json"), &report)?;
    std::fs::write(out_dir.join("summary.csv"), summary_csv(&report))?;
    println!("{}", summary_csv(&report).trim_end());
    Ok(())
}

fn report(input: &Path, plots_dir: &Path) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(input).map_err(|e| {
        CliError::new(EXIT_IO, "io", format!("{}: {e}", input.display()))
    })?;
    let value: serde_json::Value = serde_json::from_str(&raw)
        .map_err(|e| CliError::new(EXIT_DATA, "data", format!("bad report JSON: {e}")))?;
    std::fs::create_dir_all(plots_dir)?;
    let written = crate::plots::render(&value, plots_dir)
        .map_err(|e| CliError::new(EXIT_DATA, "data", e))?;
    println!(
        "{}",
        serde_json::json!({ "plots": written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() })
    );
    Ok(())
}
