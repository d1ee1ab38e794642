//! The knowledge-tracing model: fused embedding rows assembled per instance,
//! a self-attention stack with max-pooling and a sigmoid head, and the
//! composite training objective
//! `L_total = L_pred + L_question + lambda * L_triplet`.
//!
//! Row layout per history group is `[PE, CE.., QE.., SE..]`: one problem
//! row, one row per submission, one question row per question (or a single
//! zero row), and one skill row per question (or a single zero row). The
//! target contributes two final rows `[PE_T, SE_T]`.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AttemptGroup, Corpus, LabeledInstance, ProblemId, ProblemSpec};
use crate::encoders::{
    encode_on_tape, response_loss_on_tape, skill_set_text, EncoderBackend, EncoderConfig,
    EncoderError, Modality,
};
use crate::fusion::{
    project_on_tape, sample_triplets, triplet_loss_on_tape, FusionConfig, FusionError,
    TripletPools,
};
use crate::nn::{ForwardPass, Init, ParamStore};
use crate::skills::Extractor;
use crate::tape::{Gradients, NodeId};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("instance references unknown problem {0:?}")]
    UnknownProblem(ProblemId),
    #[error("instance has empty history")]
    EmptyHistory,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The attention predictor over fused rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub layers: usize,
    pub heads: usize,
    pub dim: usize,
    pub ff_dim: usize,
    /// Row budget; longer sequences drop oldest history groups first.
    pub n_max: usize,
    /// Learned positional embeddings over the flattened sequence.
    pub positional: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            layers: 6,
            heads: 8,
            dim: 512,
            ff_dim: 2048,
            n_max: 1024,
            positional: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub fusion: FusionConfig,
    pub predictor: PredictorConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.predictor.dim != self.fusion.dim {
            return Err(ModelError::Config(format!(
                "predictor dim {} must equal fusion dim {}",
                self.predictor.dim, self.fusion.dim
            )));
        }
        if self.predictor.dim % self.predictor.heads != 0 {
            return Err(ModelError::Config(format!(
                "predictor dim {} not divisible by heads {}",
                self.predictor.dim, self.predictor.heads
            )));
        }
        if self.encoder.dim % self.encoder.heads != 0 {
            return Err(ModelError::Config(format!(
                "encoder dim {} not divisible by heads {}",
                self.encoder.dim, self.encoder.heads
            )));
        }
        if self.predictor.layers == 0 || self.encoder.layers == 0 {
            return Err(ModelError::Config("layer counts must be positive".into()));
        }
        if self.predictor.n_max < 4 {
            return Err(ModelError::Config("n_max too small".into()));
        }
        Ok(())
    }

    /// Desk-scale preset: same six-layer predictor shape, narrow widths.
    pub fn small() -> Self {
        Self {
            encoder: EncoderConfig {
                dim: 32,
                layers: 2,
                heads: 4,
                ff_dim: 64,
                max_len: 96,
                decoder_layers: 1,
            },
            fusion: FusionConfig {
                dim: 64,
                margin: 1.0,
            },
            predictor: PredictorConfig {
                layers: 6,
                heads: 4,
                dim: 64,
                ff_dim: 128,
                n_max: 256,
                positional: true,
            },
        }
    }
}

/// How question rows enter the input sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionRowMode {
    Encode,
    /// All-ones vectors: question presence without content.
    AllOnes,
    /// Zero rows in the same positions.
    Zero,
}

/// How skill rows (from questions, and the target skill row) enter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillRowMode {
    Encode,
    Zero,
}

/// Ablation switches: row modes shape the input, `use_question_loss` and
/// `triplet_weight` shape the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub question_rows: QuestionRowMode,
    pub skill_rows: SkillRowMode,
    pub use_question_loss: bool,
    /// Weight lambda of the triplet loss in the total objective.
    pub triplet_weight: f64,
}

impl Default for Variant {
    fn default() -> Self {
        Self::full()
    }
}

impl Variant {
    pub fn full() -> Self {
        Self {
            question_rows: QuestionRowMode::Encode,
            skill_rows: SkillRowMode::Encode,
            use_question_loss: true,
            triplet_weight: 1.0,
        }
    }
}

/// Named ablation variants mirroring the reported tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantId {
    Full,
    QuestionAllOnes,
    SkillOnly,
    QuestionOnly,
    NoQuestionSkill,
    NoTriplet,
    NoQuestionLoss,
}

impl VariantId {
    pub const TABLE3: [VariantId; 5] = [
        VariantId::Full,
        VariantId::QuestionAllOnes,
        VariantId::SkillOnly,
        VariantId::QuestionOnly,
        VariantId::NoQuestionSkill,
    ];
    pub const TABLE4: [VariantId; 3] = [
        VariantId::Full,
        VariantId::NoQuestionLoss,
        VariantId::NoTriplet,
    ];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "full" => Some(VariantId::Full),
            "question_all_ones" => Some(VariantId::QuestionAllOnes),
            "skill_only" => Some(VariantId::SkillOnly),
            "question_only" => Some(VariantId::QuestionOnly),
            "no_question_skill" => Some(VariantId::NoQuestionSkill),
            "no_triplet" => Some(VariantId::NoTriplet),
            "no_question_loss" => Some(VariantId::NoQuestionLoss),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VariantId::Full => "full",
            VariantId::QuestionAllOnes => "question_all_ones",
            VariantId::SkillOnly => "skill_only",
            VariantId::QuestionOnly => "question_only",
            VariantId::NoQuestionSkill => "no_question_skill",
            VariantId::NoTriplet => "no_triplet",
            VariantId::NoQuestionLoss => "no_question_loss",
        }
    }

    /// Row label used in report tables.
    pub fn display_label(self) -> &'static str {
        match self {
            VariantId::Full => "SQKT",
            VariantId::QuestionAllOnes => "- Question (all-ones vector)",
            VariantId::SkillOnly => "- Question (skill only)",
            VariantId::QuestionOnly => "- Skill (question only)",
            VariantId::NoQuestionSkill => "- Question and skill",
            VariantId::NoTriplet => "- Triplet",
            VariantId::NoQuestionLoss => "- Question loss",
        }
    }

    /// Switch settings behind each named variant. Variants without encoded
    /// question rows also drop the response loss: the question encoder it
    /// trains no longer feeds the predictor.
    pub fn variant(self) -> Variant {
        match self {
            VariantId::Full => Variant::full(),
            VariantId::QuestionAllOnes => Variant {
                question_rows: QuestionRowMode::AllOnes,
                use_question_loss: false,
                ..Variant::full()
            },
            VariantId::SkillOnly => Variant {
                question_rows: QuestionRowMode::Zero,
                use_question_loss: false,
                ..Variant::full()
            },
            VariantId::QuestionOnly => Variant {
                skill_rows: SkillRowMode::Zero,
                ..Variant::full()
            },
            VariantId::NoQuestionSkill => Variant {
                question_rows: QuestionRowMode::Zero,
                skill_rows: SkillRowMode::Zero,
                use_question_loss: false,
                ..Variant::full()
            },
            VariantId::NoTriplet => Variant {
                triplet_weight: 0.0,
                ..Variant::full()
            },
            VariantId::NoQuestionLoss => Variant {
                use_question_loss: false,
                ..Variant::full()
            },
        }
    }
}

/// Loss components of one step; `l_total` is exactly
/// `l_pred + l_question + lambda * l_triplet`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBundle {
    pub l_pred: f64,
    pub l_question: f64,
    pub l_triplet: f64,
    pub lambda: f64,
    pub l_total: f64,
    pub question_batch_empty: bool,
    pub triplet_batch_single_problem: bool,
}

/// The exact weighted sum of the three loss components.
pub fn total_loss(l_pred: f64, l_question: f64, l_triplet: f64, lambda: f64) -> f64 {
    l_pred + l_question + lambda * l_triplet
}

/// Binary cross-entropy on a probability, clamped at 1e-7 for numeric
/// safety.
pub fn prediction_loss(y_hat: f64, y: f64) -> f64 {
    let p = y_hat.clamp(1e-7, 1.0 - 1e-7);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Row count of one history group:
/// `1 + #submissions + 2 * max(#questions, 1)`.
pub fn history_group_row_count(group: &AttemptGroup) -> usize {
    1 + group.submissions.len() + 2 * group.questions.len().max(1)
}

/// Flattened sequence length including the two target rows.
pub fn sequence_row_count(history: &[AttemptGroup]) -> usize {
    2 + history.iter().map(history_group_row_count).sum::<usize>()
}

type RowCache = HashMap<(Modality, String), NodeId>;

struct RowBuild {
    rows: Vec<NodeId>,
    pools: TripletPools,
    response_pairs: Vec<(String, String)>,
}

pub struct SqktModel {
    pub store: ParamStore,
    pub cfg: ModelConfig,
    pub variant: Variant,
    pub backend: EncoderBackend,
    /// question text -> joined skill text; extraction is deterministic so
    /// the cache is just a speedup.
    skill_text_cache: HashMap<String, String>,
}

impl std::fmt::Debug for SqktModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SqktModel")
            .field("params", &self.store.param_count())
            .field("cfg", &self.cfg)
            .field("variant", &self.variant)
            .finish_non_exhaustive()
    }
}

impl SqktModel {
    pub fn new(
        cfg: ModelConfig,
        variant: Variant,
        backend: EncoderBackend,
        seed: u64,
    ) -> Result<Self, ModelError> {
        cfg.validate()?;
        if variant.use_question_loss && !backend.is_trainable() {
            return Err(ModelError::Config(
                "the response loss requires the trainable question encoder".into(),
            ));
        }
        Ok(Self {
            store: ParamStore::new(seed),
            cfg,
            variant,
            backend,
            skill_text_cache: HashMap::new(),
        })
    }

    pub fn param_count(&self) -> usize {
        self.store.param_count()
    }

    fn skills_text_for_question(&mut self, question_text: &str) -> String {
        if let Some(hit) = self.skill_text_cache.get(question_text) {
            return hit.clone();
        }
        let skills = Extractor::bundled().extract_from_question(question_text);
        let text = skill_set_text(&skills);
        self.skill_text_cache
            .insert(question_text.to_string(), text.clone());
        text
    }

    /// Encode + project one text; repeated texts share a node so gradients
    /// accumulate across all their uses.
    fn fused_row(
        fp: &mut ForwardPass,
        cache: &mut RowCache,
        cfg: &ModelConfig,
        backend: &EncoderBackend,
        modality: Modality,
        text: &str,
    ) -> Result<NodeId, ModelError> {
        if let Some(&hit) = cache.get(&(modality, text.to_string())) {
            return Ok(hit);
        }
        let enc = encode_on_tape(fp, &cfg.encoder, backend, modality, text)?;
        let fused = project_on_tape(fp, modality, enc, cfg.encoder.dim, cfg.fusion.dim);
        cache.insert((modality, text.to_string()), fused);
        Ok(fused)
    }

    /// Rows contributed by one history group, in the fixed
    /// `[PE, CE.., QE.., SE..]` layout. Also records triplet pool entries
    /// and response pairs when training signals are requested.
    #[allow(clippy::too_many_arguments)]
    fn group_rows(
        &mut self,
        fp: &mut ForwardPass,
        cache: &mut RowCache,
        corpus: &Corpus,
        group: &AttemptGroup,
        build: &mut RowBuild,
        collect_training_signals: bool,
    ) -> Result<(), ModelError> {
        let dim = self.cfg.fusion.dim;
        let cfg = self.cfg.clone();
        let backend = self.backend.clone();
        let variant = self.variant.clone();

        let problem = corpus
            .problem(&group.problem_id)
            .ok_or_else(|| ModelError::UnknownProblem(group.problem_id.clone()))?;
        let pe = Self::fused_row(
            fp,
            cache,
            &cfg,
            &backend,
            Modality::Problem,
            &problem.description_text,
        )?;
        build.rows.push(pe);
        if collect_training_signals
            && !build
                .pools
                .problem_descs
                .iter()
                .any(|(p, _)| p == &group.problem_id)
        {
            build
                .pools
                .problem_descs
                .push((group.problem_id.clone(), pe));
        }

        let mut group_question_indices: Vec<usize> = Vec::new();
        let mut question_rows: Vec<NodeId> = Vec::new();
        let mut skill_rows: Vec<NodeId> = Vec::new();
        for q in &group.questions {
            match variant.question_rows {
                QuestionRowMode::Encode => {
                    let qe = Self::fused_row(
                        fp,
                        cache,
                        &cfg,
                        &backend,
                        Modality::Question,
                        &q.question_text,
                    )?;
                    question_rows.push(qe);
                    if collect_training_signals {
                        group_question_indices.push(build.pools.questions.len());
                        build.pools.questions.push((group.problem_id.clone(), qe));
                        if variant.use_question_loss && !q.educator_response_text.is_empty() {
                            build
                                .response_pairs
                                .push((q.question_text.clone(), q.educator_response_text.clone()));
                        }
                    }
                }
                QuestionRowMode::AllOnes => {
                    question_rows.push(fp.tape.constant(Array2::from_elem((1, dim), 1.0)));
                }
                QuestionRowMode::Zero => question_rows.push(fp.tape.zeros(1, dim)),
            }
            match variant.skill_rows {
                SkillRowMode::Encode => {
                    let text = self.skills_text_for_question(&q.question_text);
                    let se = Self::fused_row(fp, cache, &cfg, &backend, Modality::Skill, &text)?;
                    skill_rows.push(se);
                }
                SkillRowMode::Zero => skill_rows.push(fp.tape.zeros(1, dim)),
            }
        }
        if group.questions.is_empty() {
            question_rows.push(fp.tape.zeros(1, dim));
            skill_rows.push(fp.tape.zeros(1, dim));
        }

        for s in &group.submissions {
            let ce = Self::fused_row(fp, cache, &cfg, &backend, Modality::Code, &s.code_text)?;
            build.rows.push(ce);
            if collect_training_signals {
                build.pools.code_anchors.push((
                    group.problem_id.clone(),
                    ce,
                    group_question_indices.clone(),
                ));
            }
        }
        build.rows.extend(question_rows);
        build.rows.extend(skill_rows);
        Ok(())
    }

    /// Full row sequence for one instance, target rows last.
    fn build_instance_rows(
        &mut self,
        fp: &mut ForwardPass,
        cache: &mut RowCache,
        corpus: &Corpus,
        instance: &LabeledInstance,
        collect_training_signals: bool,
    ) -> Result<RowBuild, ModelError> {
        if instance.history.is_empty() {
            return Err(ModelError::EmptyHistory);
        }
        let target = corpus
            .problem(&instance.target_problem_id)
            .ok_or_else(|| ModelError::UnknownProblem(instance.target_problem_id.clone()))?
            .clone();

        // Oldest groups drop first when the row budget is exceeded.
        let mut start = 0usize;
        while instance.history.len() - start > 1
            && sequence_row_count(&instance.history[start..]) > self.cfg.predictor.n_max
        {
            start += 1;
        }

        let mut build = RowBuild {
            rows: Vec::new(),
            pools: TripletPools::default(),
            response_pairs: Vec::new(),
        };
        for group in &instance.history[start..] {
            self.group_rows(fp, cache, corpus, group, &mut build, collect_training_signals)?;
        }

        let cfg = self.cfg.clone();
        let backend = self.backend.clone();
        let pe_t = Self::fused_row(
            fp,
            cache,
            &cfg,
            &backend,
            Modality::Problem,
            &target.description_text,
        )?;
        build.rows.push(pe_t);
        let se_t = match self.variant.skill_rows {
            SkillRowMode::Encode => {
                let text = skill_set_text(&target.required_skills);
                Self::fused_row(fp, cache, &cfg, &backend, Modality::Skill, &text)?
            }
            SkillRowMode::Zero => fp.tape.zeros(1, cfg.fusion.dim),
        };
        build.rows.push(se_t);
        Ok(build)
    }

    /// Attention stack over assembled rows; returns the pre-sigmoid logit.
    fn predictor_logit(&mut self, fp: &mut ForwardPass, rows: &[NodeId]) -> NodeId {
        let p = self.cfg.predictor.clone();
        let mut x = fp.tape.concat_rows(rows);
        let n = fp.tape.value(x).nrows();
        if p.positional {
            let pos_table = fp.param("pred.pos", p.n_max, p.dim, Init::Uniform { scale: 0.05 });
            let positions: Vec<usize> = (0..n).map(|i| i.min(p.n_max - 1)).collect();
            let pe = fp.tape.gather_rows(pos_table, &positions);
            x = fp.tape.add(x, pe);
        }
        for layer in 0..p.layers {
            x = fp.encoder_block(&format!("pred.l{layer}"), x, p.dim, p.heads, p.ff_dim, None);
        }
        let x = fp.layer_norm("pred.out_ln", x, p.dim);
        let pooled = fp.tape.max_rows(x);
        fp.linear("pred.head", pooled, p.dim, 1, true)
    }

    /// Evaluation-mode success probability for one instance.
    pub fn predict(
        &mut self,
        corpus: &Corpus,
        instance: &LabeledInstance,
    ) -> Result<f64, ModelError> {
        Ok(self.predict_batch(corpus, std::slice::from_ref(instance))?[0])
    }

    /// Evaluation-mode probabilities for many instances; one tape per chunk
    /// so repeated texts are encoded once.
    pub fn predict_batch(
        &mut self,
        corpus: &Corpus,
        instances: &[LabeledInstance],
    ) -> Result<Vec<f64>, ModelError> {
        let mut out = Vec::with_capacity(instances.len());
        for chunk in instances.chunks(32) {
            let mut store = std::mem::replace(&mut self.store, ParamStore::new(0));
            let result = self.predict_chunk(&mut store, corpus, chunk, &mut out);
            self.store = store;
            result?;
        }
        Ok(out)
    }

    fn predict_chunk(
        &mut self,
        store: &mut ParamStore,
        corpus: &Corpus,
        chunk: &[LabeledInstance],
        out: &mut Vec<f64>,
    ) -> Result<(), ModelError> {
        let mut fp = ForwardPass::eval(store);
        let mut cache = RowCache::new();
        for instance in chunk {
            let build = self.build_instance_rows(&mut fp, &mut cache, corpus, instance, false)?;
            let logit = self.predictor_logit(&mut fp, &build.rows);
            let prob = fp.tape.sigmoid_node(logit);
            out.push(fp.tape.scalar(prob));
        }
        Ok(())
    }

    /// One training step over a batch: forward, losses, backward, Adam.
    pub fn train_step(
        &mut self,
        corpus: &Corpus,
        batch: &[LabeledInstance],
        learning_rate: f64,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<LossBundle, ModelError> {
        let (bundle, grads) = self.batch_losses(corpus, batch, dropout, rng, true)?;
        if let Some(grads) = grads {
            self.store.adam_step(&grads, learning_rate);
        }
        Ok(bundle)
    }

    /// Forward over a batch in training layout; optionally also the backward
    /// pass. Exposed so gradient checks can reuse the exact training path.
    pub fn batch_losses(
        &mut self,
        corpus: &Corpus,
        batch: &[LabeledInstance],
        dropout: f64,
        rng: &mut ChaCha8Rng,
        want_grads: bool,
    ) -> Result<(LossBundle, Option<Gradients>), ModelError> {
        assert!(!batch.is_empty(), "empty training batch");
        let dropout_seed = rng.next_u64();
        let triplet_seed = rng.next_u64();
        let mut store = std::mem::replace(&mut self.store, ParamStore::new(0));
        let result = self.batch_losses_inner(
            &mut store,
            corpus,
            batch,
            dropout,
            dropout_seed,
            triplet_seed,
            want_grads,
        );
        self.store = store;
        result
    }

    #[allow(clippy::too_many_arguments)]
    fn batch_losses_inner(
        &mut self,
        store: &mut ParamStore,
        corpus: &Corpus,
        batch: &[LabeledInstance],
        dropout: f64,
        dropout_seed: u64,
        triplet_seed: u64,
        want_grads: bool,
    ) -> Result<(LossBundle, Option<Gradients>), ModelError> {
        let lambda = self.variant.triplet_weight;
        let margin = self.cfg.fusion.margin;
        let use_question_loss = self.variant.use_question_loss;
        let encoder_cfg = self.cfg.encoder.clone();

        let mut fp = ForwardPass::train(store, dropout, ChaCha8Rng::seed_from_u64(dropout_seed));
        let mut cache = RowCache::new();
        let mut bce_nodes = Vec::with_capacity(batch.len());
        let mut pools = TripletPools::default();
        let mut response_pairs: Vec<(String, String)> = Vec::new();

        for instance in batch {
            let mut build = self.build_instance_rows(&mut fp, &mut cache, corpus, instance, true)?;
            let logit = self.predictor_logit(&mut fp, &build.rows);
            bce_nodes.push(fp.tape.sigmoid_bce(logit, instance.label.as_f64()));

            let q_offset = pools.questions.len();
            for (p, n) in build.pools.problem_descs.drain(..) {
                if !pools.problem_descs.iter().any(|(pp, _)| pp == &p) {
                    pools.problem_descs.push((p, n));
                }
            }
            pools.questions.append(&mut build.pools.questions);
            for (p, n, qs) in build.pools.code_anchors.drain(..) {
                pools
                    .code_anchors
                    .push((p, n, qs.into_iter().map(|i| i + q_offset).collect()));
            }
            response_pairs.append(&mut build.response_pairs);
        }

        // L_pred: batch mean of per-instance BCE.
        let mut bce_sum = bce_nodes[0];
        for &n in &bce_nodes[1..] {
            bce_sum = fp.tape.add(bce_sum, n);
        }
        let l_pred = fp.tape.scale(bce_sum, 1.0 / bce_nodes.len() as f64);

        // L_question: token-normalized response NLL over the batch pairs.
        let question_result = if use_question_loss {
            response_loss_on_tape(&mut fp, &encoder_cfg, &response_pairs)
        } else {
            None
        };
        let (l_question_node, question_batch_empty) = match question_result {
            Some((node, _tokens)) => (Some(node), false),
            None => (None, use_question_loss),
        };

        // L_triplet: mean hinge over sampled triplets.
        let mut triplet_rng = ChaCha8Rng::seed_from_u64(triplet_seed);
        let mut triplet_batch_single_problem = false;
        let l_triplet_node = if lambda != 0.0 {
            let sampled = sample_triplets(&pools, &mut triplet_rng);
            triplet_batch_single_problem = sampled.single_problem;
            if sampled.triplets.is_empty() {
                None
            } else {
                let nodes: Vec<NodeId> = sampled
                    .triplets
                    .iter()
                    .map(|t| {
                        triplet_loss_on_tape(&mut fp.tape, t.anchor, t.positive, t.negative, margin)
                    })
                    .collect();
                let mut s = nodes[0];
                for &n in &nodes[1..] {
                    s = fp.tape.add(s, n);
                }
                Some(fp.tape.scale(s, 1.0 / nodes.len() as f64))
            }
        } else {
            None
        };

        // L_total = L_pred + L_question + lambda * L_triplet.
        let mut total = l_pred;
        if let Some(q) = l_question_node {
            total = fp.tape.add(total, q);
        }
        if let Some(t) = l_triplet_node {
            let weighted = fp.tape.scale(t, lambda);
            total = fp.tape.add(total, weighted);
        }

        let bundle = LossBundle {
            l_pred: fp.tape.scalar(l_pred),
            l_question: l_question_node.map(|n| fp.tape.scalar(n)).unwrap_or(0.0),
            l_triplet: l_triplet_node.map(|n| fp.tape.scalar(n)).unwrap_or(0.0),
            lambda,
            l_total: fp.tape.scalar(total),
            question_batch_empty,
            triplet_batch_single_problem,
        };
        let grads = if want_grads {
            Some(fp.tape.backward(total))
        } else {
            None
        };
        Ok((bundle, grads))
    }

    /// Runs one loss-building forward so every parameter the variant uses on
    /// these instances is materialized; parameter counts are then comparable
    /// across variants.
    pub fn materialize_params(
        &mut self,
        corpus: &Corpus,
        instances: &[LabeledInstance],
    ) -> Result<(), ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let _ = self.batch_losses(corpus, instances, 0.0, &mut rng, false)?;
        Ok(())
    }
}

/// Assembled target tensor: exactly 2 x fused-dim, description row then
/// required-skills row.
pub fn assemble_target(
    model: &mut SqktModel,
    problem: &ProblemSpec,
) -> Result<Array2<f64>, ModelError> {
    let cfg = model.cfg.clone();
    let backend = model.backend.clone();
    let mut fp = ForwardPass::eval(&mut model.store);
    let mut cache = RowCache::new();
    let pe = SqktModel::fused_row(
        &mut fp,
        &mut cache,
        &cfg,
        &backend,
        Modality::Problem,
        &problem.description_text,
    )?;
    let se = SqktModel::fused_row(
        &mut fp,
        &mut cache,
        &cfg,
        &backend,
        Modality::Skill,
        &skill_set_text(&problem.required_skills),
    )?;
    let rows = fp.tape.concat_rows(&[pe, se]);
    Ok(fp.tape.value(rows).clone())
}

/// The K x fused-dim row block of a single history group.
pub fn assemble_history_group(
    model: &mut SqktModel,
    corpus: &Corpus,
    group: &AttemptGroup,
) -> Result<Array2<f64>, ModelError> {
    if group.submissions.is_empty() {
        return Err(ModelError::EmptyHistory);
    }
    let mut store = std::mem::replace(&mut model.store, ParamStore::new(0));
    let out = {
        let mut fp = ForwardPass::eval(&mut store);
        let mut cache = RowCache::new();
        let mut build = RowBuild {
            rows: Vec::new(),
            pools: TripletPools::default(),
            response_pairs: Vec::new(),
        };
        model
            .group_rows(&mut fp, &mut cache, corpus, group, &mut build, false)
            .map(|()| {
                let rows = fp.tape.concat_rows(&build.rows);
                fp.tape.value(rows).clone()
            })
    };
    model.store = store;
    out
}

/// The full flattened N x fused-dim sequence for one instance.
pub fn assemble_sequence(
    model: &mut SqktModel,
    corpus: &Corpus,
    instance: &LabeledInstance,
) -> Result<Array2<f64>, ModelError> {
    let mut store = std::mem::replace(&mut model.store, ParamStore::new(0));
    let out = {
        let mut fp = ForwardPass::eval(&mut store);
        let mut cache = RowCache::new();
        model
            .build_instance_rows(&mut fp, &mut cache, corpus, instance, false)
            .map(|build| {
                let rows = fp.tape.concat_rows(&build.rows);
                fp.tape.value(rows).clone()
            })
    };
    model.store = store;
    out
}
