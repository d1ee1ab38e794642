use sqkt_core::corpus::{generate_synthetic_corpus, GenConfig, CourseId};
use sqkt_core::model::{ModelConfig, VariantId};
use sqkt_core::train::{run_experiment, ExperimentKind, ExperimentSpec, TrainConfig};

#[test]
fn bench_single_run() {
    let gen = GenConfig {
        n_students: 200,
        n_problems: 4,
        question_signal_strength: 1.0,
        ..GenConfig::default()
    };
    let t0 = std::time::Instant::now();
    let corpus = generate_synthetic_corpus(&gen, 42).unwrap();
    eprintln!("corpus gen: {:?}", t0.elapsed());

    let spec = ExperimentSpec {
        kind: ExperimentKind::Ablation,
        train_courses: vec![CourseId::from("course-0")],
        test_courses: vec![CourseId::from("course-0")],
        variants: vec![VariantId::Full, VariantId::NoQuestionSkill],
        seeds: vec![1],
    };
    let mut model_cfg = ModelConfig::small();
    model_cfg.encoder.dim = 24;
    model_cfg.encoder.ff_dim = 48;
    model_cfg.encoder.max_len = 80;
    model_cfg.encoder.decoder_layers = 1;
    model_cfg.fusion.dim = 48;
    model_cfg.predictor.dim = 48;
    model_cfg.predictor.ff_dim = 96;
    let train_cfg = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 16,
        dropout: 0.1,
        lambda: 1.0,
        max_epochs: 4,
        patience: 2,
        seed: 1,
        grid: None,
    };
    let t0 = std::time::Instant::now();
    let report = run_experiment(&spec, &corpus, &model_cfg, &train_cfg).unwrap();
    for v in &report.variants {
        let vr = &v.per_seed[0];
        eprintln!(
            "{} 4 epochs: total {:?}, test AUC {:.3}, val_auc {:?}, n_test {}",
            v.label,
            t0.elapsed(),
            vr.metrics.auc,
            vr.best_val_auc,
            vr.metrics.n_instances
        );
    }
}
