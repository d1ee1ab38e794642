//! End-to-end tests of the `sqkt` binary: the full pipeline, exit codes,
//! idempotent outputs, and help/flag parity.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sqkt"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(["--workdir", dir.to_str().unwrap()])
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_gen_config(dir: &Path, n_students: usize) {
    std::fs::write(
        dir.join("gen.toml"),
        format!(
            "n_students = {n_students}\nn_problems = 3\nmax_attempts = 2\nquestion_signal_strength = 0.5\n"
        ),
    )
    .unwrap();
}

fn write_model_config(dir: &Path) {
    std::fs::write(
        dir.join("model.toml"),
        r#"
[encoder]
dim = 16
layers = 1
heads = 2
max_len = 64
ff_dim = 32
decoder_layers = 1

[fusion]
dim = 32

[model]
layers = 2
heads = 2
ff_dim = 64
n_max = 128

[train]
learning_rate = 1e-3
batch_size = 8
max_epochs = 1
patience = 2
"#,
    )
    .unwrap();
}

#[test]
fn full_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_gen_config(d, 14);
    write_model_config(d);

    assert_ok(&run(
        &["synth", "--config", "gen.toml", "--seed", "5", "--out", "corpus.jsonl"],
        d,
    ));
    assert_ok(&run(
        &["split", "--corpus", "corpus.jsonl", "--seed", "5", "--out", "splits.json"],
        d,
    ));
    assert_ok(&run(
        &["label", "--corpus", "corpus.jsonl", "--splits", "splits.json", "--out", "labels.json"],
        d,
    ));
    assert_ok(&run(
        &[
            "train", "--corpus", "corpus.jsonl", "--splits", "splits.json", "--config",
            "model.toml", "--seed", "5", "--out", "run",
        ],
        d,
    ));
    assert!(d.join("run/model.ckpt").exists());
    assert!(d.join("run/train_log.jsonl").exists());
    assert_ok(&run(
        &[
            "eval", "--ckpt", "run/model.ckpt", "--corpus", "corpus.jsonl", "--splits",
            "splits.json", "--out", "report.json",
        ],
        d,
    ));
    assert_ok(&run(
        &["report", "--in", "report.json", "--plots", "plots"],
        d,
    ));
    assert!(d.join("plots/metrics_bars.svg").exists());
    assert!(d.join("plots/roc.svg").exists());

    let labels: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("labels.json")).unwrap()).unwrap();
    assert!(labels["thresholds"].is_object());
    assert!(!labels["labels"].as_array().unwrap().is_empty());
}

#[test]
fn synth_is_byte_identical_per_seed_and_accepts_zero_students() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_gen_config(d, 6);
    assert_ok(&run(
        &["synth", "--config", "gen.toml", "--seed", "9", "--out", "a.jsonl"],
        d,
    ));
    assert_ok(&run(
        &["synth", "--config", "gen.toml", "--seed", "9", "--out", "b.jsonl"],
        d,
    ));
    assert_ok(&run(
        &["synth", "--config", "gen.toml", "--seed", "10", "--out", "c.jsonl"],
        d,
    ));
    let a = std::fs::read(d.join("a.jsonl")).unwrap();
    let b = std::fs::read(d.join("b.jsonl")).unwrap();
    let c = std::fs::read(d.join("c.jsonl")).unwrap();
    assert_eq!(a, b, "same seed must be byte-identical");
    assert_ne!(a, c, "different seed must differ");

    write_gen_config(d, 0);
    assert_ok(&run(
        &["synth", "--config", "gen.toml", "--seed", "1", "--out", "empty.jsonl"],
        d,
    ));
    assert_eq!(std::fs::read_to_string(d.join("empty.jsonl")).unwrap(), "");
}

#[test]
fn extract_reads_file_and_emits_canonical_names() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("q.txt"),
        "Why does the summation variable not produce the correct summation when printed?\nsummation = 0\nwhile num > 0:\n    summation = summation + 1\nprint(summation)",
    )
    .unwrap();
    let out = run(&["extract", "--in", "q.txt"], d);
    assert_ok(&out);
    let names: Vec<String> =
        serde_json::from_slice(&out.stdout).expect("stdout is a JSON array");
    for expected in ["While Loops", "print function", "Operators"] {
        assert!(
            names.iter().any(|n| n == expected),
            "missing {expected} in {names:?}"
        );
    }
}

#[test]
fn missing_files_and_bad_configs_use_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // missing corpus -> 3
    let out = run(
        &["split", "--corpus", "nope.jsonl", "--seed", "1", "--out", "s.json"],
        d,
    );
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err_line: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap())
            .expect("machine-readable error line");
    assert_eq!(err_line["error"], "io");

    // malformed generator config -> 4
    std::fs::write(d.join("bad.toml"), "n_students = -3").unwrap();
    let out = run(
        &["synth", "--config", "bad.toml", "--seed", "1", "--out", "c.jsonl"],
        d,
    );
    assert_eq!(out.status.code(), Some(4));

    // unknown command -> clap usage error 2
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_rejects_mismatched_config_with_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_gen_config(d, 14);
    write_model_config(d);
    assert_ok(&run(
        &["synth", "--config", "gen.toml", "--seed", "3", "--out", "corpus.jsonl"],
        d,
    ));
    assert_ok(&run(
        &["split", "--corpus", "corpus.jsonl", "--seed", "3", "--out", "splits.json"],
        d,
    ));
    assert_ok(&run(
        &[
            "train", "--corpus", "corpus.jsonl", "--splits", "splits.json", "--config",
            "model.toml", "--seed", "3", "--out", "run",
        ],
        d,
    ));
    // a config with a different encoder dim
    std::fs::write(
        d.join("other.toml"),
        "[encoder]\ndim = 24\nlayers = 1\nheads = 2\nmax_len = 64\nff_dim = 32\ndecoder_layers = 1\n[fusion]\ndim = 32\n[model]\nlayers = 2\nheads = 2\nff_dim = 64\nn_max = 128\n",
    )
    .unwrap();
    let out = run(
        &[
            "eval", "--ckpt", "run/model.ckpt", "--corpus", "corpus.jsonl", "--splits",
            "splits.json", "--config", "other.toml", "--out", "r.json",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(5), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err_line: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap())
            .unwrap();
    assert_eq!(err_line["error"], "config_mismatch");
}

#[test]
fn eval_output_is_idempotent_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_gen_config(d, 24);
    write_model_config(d);
    assert_ok(&run(
        &["synth", "--config", "gen.toml", "--seed", "13", "--out", "corpus.jsonl"],
        d,
    ));
    assert_ok(&run(
        &["split", "--corpus", "corpus.jsonl", "--seed", "13", "--out", "splits.json"],
        d,
    ));
    assert_ok(&run(
        &[
            "train", "--corpus", "corpus.jsonl", "--splits", "splits.json", "--config",
            "model.toml", "--seed", "13", "--out", "run",
        ],
        d,
    ));
    for out_name in ["r1.json", "r2.json"] {
        assert_ok(&run(
            &[
                "eval", "--ckpt", "run/model.ckpt", "--corpus", "corpus.jsonl", "--splits",
                "splits.json", "--out", out_name,
            ],
            d,
        ));
    }
    let normalize = |name: &str| {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(d.join(name)).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("generated_at_unix");
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(normalize("r1.json"), normalize("r2.json"));
}

/// Every flag a subcommand accepts must appear in its help text.
#[test]
fn help_text_covers_every_flag() {
    let expectations: &[(&str, &[&str])] = &[
        ("synth", &["--config", "--seed", "--out", "--workdir"]),
        ("extract", &["--in", "--workdir"]),
        ("label", &["--corpus", "--splits", "--out", "--workdir"]),
        ("split", &["--corpus", "--seed", "--out", "--workdir"]),
        (
            "train",
            &["--corpus", "--splits", "--config", "--seed", "--out", "--workdir"],
        ),
        (
            "eval",
            &["--ckpt", "--corpus", "--splits", "--config", "--out", "--workdir"],
        ),
        (
            "ablate",
            &["--corpus", "--config", "--variants", "--seeds", "--out", "--workdir"],
        ),
        ("report", &["--in", "--plots", "--workdir"]),
    ];
    for (cmd, flags) in expectations {
        let out = bin().args([cmd, "--help"]).output().unwrap();
        assert!(out.status.success());
        let help = String::from_utf8_lossy(&out.stdout);
        for flag in *flags {
            assert!(
                help.contains(flag),
                "{cmd} --help missing {flag}:\n{help}"
            );
        }
    }
    // top-level help lists every subcommand and the exit codes
    let out = bin().arg("--help").output().unwrap();
    let help = String::from_utf8_lossy(&out.stdout);
    for cmd in ["synth", "extract", "label", "split", "train", "eval", "ablate", "report"] {
        assert!(help.contains(cmd), "top-level help missing {cmd}");
    }
    assert!(help.contains("EXIT CODES"));
}
