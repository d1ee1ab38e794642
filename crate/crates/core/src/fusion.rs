//! Fusion layer: per-modality bias-free projections into a shared space,
//! plus triplet sampling and the margin hinge loss that aligns code, problem,
//! and question embeddings.
//!
//! Projections carry no bias so the zero-vector convention for absent
//! questions and empty skill sets survives fusion exactly.

use ndarray::Array1;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ProblemId;
use crate::encoders::Modality;
use crate::nn::{ForwardPass, Init};
use crate::tape::{NodeId, Tape};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("projection input has dim {got}, modality {modality:?} expects {expected}")]
    DimMismatch {
        modality: Modality,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Shared embedding width after projection.
    pub dim: usize,
    /// Hinge margin of the triplet loss.
    pub margin: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            dim: 512,
            margin: 1.0,
        }
    }
}

fn projection_name(modality: Modality) -> &'static str {
    match modality {
        Modality::Problem => "fusion.problem",
        Modality::Code => "fusion.code",
        Modality::Question => "fusion.question",
        Modality::Skill => "fusion.skill",
    }
}

/// Bias-free linear map from the encoder's native width into the fused
/// space, on the tape.
pub fn project_on_tape(
    fp: &mut ForwardPass,
    modality: Modality,
    x: NodeId,
    d_enc: usize,
    fused_dim: usize,
) -> NodeId {
    assert_eq!(
        fp.tape.value(x).ncols(),
        d_enc,
        "projection input width mismatch"
    );
    let w = fp.param(
        &format!("{}.w", projection_name(modality)),
        d_enc,
        fused_dim,
        Init::Xavier {
            fan_in: d_enc,
            fan_out: fused_dim,
        },
    );
    fp.tape.matmul(x, w)
}

/// A projected vector tagged with its source modality.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedEmbedding {
    pub values: Array1<f64>,
    pub modality: Modality,
}

/// Evaluation-mode projection with an explicit dimension check.
pub fn project(
    fp: &mut ForwardPass,
    modality: Modality,
    input: &Array1<f64>,
    d_enc: usize,
    fused_dim: usize,
) -> Result<FusedEmbedding, FusionError> {
    if input.len() != d_enc {
        return Err(FusionError::DimMismatch {
            modality,
            expected: d_enc,
            got: input.len(),
        });
    }
    let x = fp
        .tape
        .constant(input.clone().insert_axis(ndarray::Axis(0)));
    let node = project_on_tape(fp, modality, x, d_enc, fused_dim);
    Ok(FusedEmbedding {
        values: fp.tape.value(node).row(0).to_owned(),
        modality,
    })
}

/// One anchor/positive/negative triple of fused embeddings. The positive and
/// negative share a modality and the negative comes from a different
/// problem.
#[derive(Debug, Clone)]
pub struct TripletBatch {
    pub anchor: Array1<f64>,
    pub positive: Array1<f64>,
    pub negative: Array1<f64>,
    pub positive_modality: Modality,
    pub margin: f64,
}

/// Hinge loss `max(0, d(a,p) - d(a,n) + margin)` with Euclidean `d`,
/// composed on a tape.
pub fn triplet_loss_on_tape(
    tape: &mut Tape,
    anchor: NodeId,
    positive: NodeId,
    negative: NodeId,
    margin: f64,
) -> NodeId {
    let dp = euclidean_on_tape(tape, anchor, positive);
    let dn = euclidean_on_tape(tape, anchor, negative);
    let diff = tape.sub(dp, dn);
    let shifted = tape.add_scalar(diff, margin);
    tape.relu(shifted)
}

fn euclidean_on_tape(tape: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    let d = tape.sub(a, b);
    let sq = tape.mul_elem(d, d);
    let s = tape.sum_all(sq);
    tape.sqrt(s)
}

/// Loss of a single triplet via the same construction training uses.
pub fn triplet_loss(t: &TripletBatch) -> f64 {
    let mut tape = Tape::new();
    let a = tape.constant(t.anchor.clone().insert_axis(ndarray::Axis(0)));
    let p = tape.constant(t.positive.clone().insert_axis(ndarray::Axis(0)));
    let n = tape.constant(t.negative.clone().insert_axis(ndarray::Axis(0)));
    let node = triplet_loss_on_tape(&mut tape, a, p, n, t.margin);
    tape.scalar(node)
}

/// Everything the sampler can draw from within one batch: fused embedding
/// nodes grouped by problem.
#[derive(Debug, Default)]
pub struct TripletPools {
    /// One problem-description embedding per distinct problem.
    pub problem_descs: Vec<(ProblemId, NodeId)>,
    /// Question embeddings with their source problem.
    pub questions: Vec<(ProblemId, NodeId)>,
    /// Code anchors: source problem, node, and indices into `questions`
    /// belonging to the same attempt group.
    pub code_anchors: Vec<(ProblemId, NodeId, Vec<usize>)>,
}

#[derive(Debug, Clone, Copy)]
pub struct SampledTriplet {
    pub anchor: NodeId,
    pub positive: NodeId,
    pub negative: NodeId,
    pub modality: Modality,
}

/// Outcome of sampling; `single_problem` is set when no valid negatives
/// exist because the batch contains a single distinct problem.
#[derive(Debug, Default)]
pub struct SampledTriplets {
    pub triplets: Vec<SampledTriplet>,
    pub single_problem: bool,
}

/// For every code anchor: one triplet against its own problem description,
/// and one against a uniformly chosen question of the same attempt group
/// when present. Negatives are uniform over other problems' embeddings of
/// the matching modality. Deterministic given the rng state.
pub fn sample_triplets(pools: &TripletPools, rng: &mut ChaCha8Rng) -> SampledTriplets {
    let distinct: std::collections::BTreeSet<&ProblemId> = pools
        .problem_descs
        .iter()
        .map(|(p, _)| p)
        .chain(pools.code_anchors.iter().map(|(p, _, _)| p))
        .collect();
    if distinct.len() < 2 {
        return SampledTriplets {
            triplets: Vec::new(),
            single_problem: true,
        };
    }
    let desc_of = |problem: &ProblemId| -> Option<NodeId> {
        pools
            .problem_descs
            .iter()
            .find(|(p, _)| p == problem)
            .map(|(_, n)| *n)
    };
    let mut out = SampledTriplets::default();
    for (problem, anchor, group_questions) in &pools.code_anchors {
        if let Some(positive) = desc_of(problem) {
            let negatives: Vec<NodeId> = pools
                .problem_descs
                .iter()
                .filter(|(p, _)| p != problem)
                .map(|(_, n)| *n)
                .collect();
            if !negatives.is_empty() {
                let negative = negatives[rng.random_range(0..negatives.len())];
                out.triplets.push(SampledTriplet {
                    anchor: *anchor,
                    positive,
                    negative,
                    modality: Modality::Problem,
                });
            }
        }
        if !group_questions.is_empty() {
            let qi = group_questions[rng.random_range(0..group_questions.len())];
            let positive = pools.questions[qi].1;
            let negatives: Vec<NodeId> = pools
                .questions
                .iter()
                .filter(|(p, _)| p != problem)
                .map(|(_, n)| *n)
                .collect();
            if !negatives.is_empty() {
                let negative = negatives[rng.random_range(0..negatives.len())];
                out.triplets.push(SampledTriplet {
                    anchor: *anchor,
                    positive,
                    negative,
                    modality: Modality::Question,
                });
            }
        }
    }
    out
}
