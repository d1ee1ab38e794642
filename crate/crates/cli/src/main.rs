//! Command-line pipeline: synthesize corpora, extract skills, label, split,
//! train, evaluate, run ablations, and render report plots.

mod commands;
mod plots;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit codes, also documented in `--help`:
/// 0 success, 2 usage, 3 missing file or I/O failure, 4 malformed config,
/// 5 checkpoint/config mismatch, 6 invalid data, 7 training or evaluation
/// failure.
pub const EXIT_IO: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;
pub const EXIT_CONFIG_MISMATCH: u8 = 5;
pub const EXIT_DATA: u8 = 6;
pub const EXIT_RUNTIME: u8 = 7;

const EXIT_CODE_HELP: &str = "EXIT CODES:\n  0  success\n  2  usage error\n  3  missing file or I/O failure\n  4  malformed config\n  5  checkpoint/config mismatch\n  6  invalid data\n  7  training or evaluation failure\n\nEnvironment overrides: SQKT_<SECTION>__<KEY> (for example\nSQKT_TRAIN__LEARNING_RATE=1e-3) take precedence over config files.";

#[derive(Parser)]
#[command(
    name = "sqkt",
    about = "Question-aware knowledge tracing pipeline",
    after_help = EXIT_CODE_HELP,
    version
)]
struct Cli {
    /// Root for resolving relative paths.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (JSONL) from a flat key-value config.
    Synth {
        /// Generator config file (flat TOML keys).
        #[arg(long)]
        config: PathBuf,
        /// Generation seed; runs are byte-identical for the same seed.
        #[arg(long)]
        seed: u64,
        /// Output corpus path (JSONL).
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract skills from question text; prints a JSON array of names.
    Extract {
        /// Input text file; stdin when omitted.
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Compute per-course thresholds and outcome labels.
    Label {
        /// Corpus path (JSONL).
        #[arg(long)]
        corpus: PathBuf,
        /// Restrict threshold statistics to the training split.
        #[arg(long)]
        splits: Option<PathBuf>,
        /// Output labels JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Student-disjoint 8:1:1 split.
    Split {
        /// Corpus path (JSONL).
        #[arg(long)]
        corpus: PathBuf,
        /// Shuffle seed; splits are deterministic per seed.
        #[arg(long)]
        seed: u64,
        /// Output splits JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint plus training log.
    Train {
        /// Corpus path (JSONL).
        #[arg(long)]
        corpus: PathBuf,
        /// Splits JSON from `split`.
        #[arg(long)]
        splits: PathBuf,
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Training seed.
        #[arg(long)]
        seed: u64,
        /// Output directory for model.ckpt, train_log.jsonl, train_report.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split and write a metrics report.
    Eval {
        /// Checkpoint from `train`.
        #[arg(long)]
        ckpt: PathBuf,
        /// Corpus path (JSONL).
        #[arg(long)]
        corpus: PathBuf,
        /// Splits JSON.
        #[arg(long)]
        splits: PathBuf,
        /// Optional config to cross-check against the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output report JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run ablation variants and write per-variant reports plus a summary CSV.
    Ablate {
        /// Corpus path (JSONL).
        #[arg(long)]
        corpus: PathBuf,
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated variant names or `table3` / `table4` presets;
        /// overrides the config list when given.
        #[arg(long)]
        variants: Option<String>,
        /// Comma-separated seeds; overrides the config list when given.
        #[arg(long)]
        seeds: Option<String>,
        /// Output directory for ablation_report.json and summary.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render static plots (AUC bars, ROC curve) from a report.
    Report {
        /// Report JSON from `eval` or `ablate`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output directory for SVG plots.
        #[arg(long)]
        plots: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.workdir, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = serde_json::json!({
                "error": err.kind,
                "message": err.message,
            });
            eprintln!("{line}");
            ExitCode::from(err.code)
        }
    }
}
