//! Question-aware knowledge tracing for programming courses.
//!
//! Pipeline pieces, bottom up: a rule-based skill extractor over the closed
//! 51-tag taxonomy (`skills`), corpus ingestion and a synthetic student
//! simulator (`corpus`), trainable per-modality text encoders with an
//! auxiliary educator-response objective (`encoders`), projection into a
//! shared embedding space aligned by a triplet loss (`fusion`), the
//! attention-based success predictor and composite objective (`model`), and
//! the optimization/evaluation/experiment layer (`train`). Everything
//! numeric runs on a small f64 autodiff tape (`tape`, `nn`) so analytic
//! gradients can be checked against finite differences (`gradcheck`).

pub mod config;
pub mod corpus;
pub mod encoders;
pub mod fusion;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod skills;
pub mod tape;
pub mod train;
