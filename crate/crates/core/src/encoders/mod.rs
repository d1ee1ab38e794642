//! Pluggable encoders producing fixed-dimension vectors for the four input
//! modalities (problem text, code, questions, skill text), plus the
//! auxiliary educator-response objective attached to the question encoder.

mod frozen;
mod tokenizer;
mod transformer;

pub use frozen::{content_hash, FrozenCache};
pub use tokenizer::{tokenize, TokenSequence, BOS, BYTE_OFFSET, EOS, VOCAB_SIZE};
pub use transformer::{encode_pooled, encode_states, response_nll_sum};

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{ForwardPass, ParamStore};
use crate::skills::SkillSet;
use crate::tape::NodeId;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad frozen cache file: {0}")]
    BadCacheFile(String),
    #[error("no frozen vector for content (hash {0})")]
    MissingFrozenVector(String),
    #[error("frozen cache dim {cache} != configured encoder dim {configured}")]
    FrozenDimMismatch { cache: usize, configured: usize },
}

/// Architecture of the per-modality trainable encoder; all four modalities
/// share this shape with separate parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub decoder_layers: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            layers: 2,
            heads: 4,
            ff_dim: 512,
            max_len: 256,
            decoder_layers: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Problem,
    Code,
    Question,
    Skill,
}

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::Problem,
        Modality::Code,
        Modality::Question,
        Modality::Skill,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            Modality::Problem => "enc.problem",
            Modality::Code => "enc.code",
            Modality::Question => "enc.question",
            Modality::Skill => "enc.skill",
        }
    }
}

/// Backend selection: a small trainable transformer per modality, or frozen
/// vectors served from a sidecar cache.
#[derive(Debug, Clone)]
pub enum EncoderBackend {
    Trainable,
    Frozen(FrozenCache),
}

impl EncoderBackend {
    pub fn is_trainable(&self) -> bool {
        matches!(self, EncoderBackend::Trainable)
    }
}

/// Encode one text on the tape. Empty text (or an absent question, passed as
/// `""` by the caller) is an exact zero vector.
pub fn encode_on_tape(
    fp: &mut ForwardPass,
    cfg: &EncoderConfig,
    backend: &EncoderBackend,
    modality: Modality,
    text: &str,
) -> Result<NodeId, EncoderError> {
    if text.is_empty() {
        return Ok(fp.tape.zeros(1, cfg.dim));
    }
    match backend {
        EncoderBackend::Trainable => Ok(encode_pooled(fp, modality.prefix(), cfg, text)),
        EncoderBackend::Frozen(cache) => {
            if cache.dim() != cfg.dim {
                return Err(EncoderError::FrozenDimMismatch {
                    cache: cache.dim(),
                    configured: cfg.dim,
                });
            }
            let v = cache.lookup(text).ok_or_else(|| {
                EncoderError::MissingFrozenVector(hex_prefix(&content_hash(text)))
            })?;
            let arr = ndarray::Array2::from_shape_vec((1, cfg.dim), v).expect("dim checked");
            Ok(fp.tape.constant(arr))
        }
    }
}

fn hex_prefix(hash: &[u8; 32]) -> String {
    hash[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// Skill sets are embedded as text: canonical names sorted and joined.
pub fn skill_set_text(skills: &SkillSet) -> String {
    skills.joined_text()
}

fn eval_vector(
    store: &mut ParamStore,
    cfg: &EncoderConfig,
    backend: &EncoderBackend,
    modality: Modality,
    text: &str,
) -> Result<Array1<f64>, EncoderError> {
    let mut fp = ForwardPass::eval(store);
    let node = encode_on_tape(&mut fp, cfg, backend, modality, text)?;
    Ok(fp.tape.value(node).row(0).to_owned())
}

/// Deterministic evaluation-mode encoders for each modality.
pub fn encode_problem(
    store: &mut ParamStore,
    cfg: &EncoderConfig,
    backend: &EncoderBackend,
    description_text: &str,
) -> Result<Array1<f64>, EncoderError> {
    eval_vector(store, cfg, backend, Modality::Problem, description_text)
}

pub fn encode_code(
    store: &mut ParamStore,
    cfg: &EncoderConfig,
    backend: &EncoderBackend,
    code_text: &str,
) -> Result<Array1<f64>, EncoderError> {
    eval_vector(store, cfg, backend, Modality::Code, code_text)
}

/// Absent questions embed as the exact zero vector.
pub fn encode_question(
    store: &mut ParamStore,
    cfg: &EncoderConfig,
    backend: &EncoderBackend,
    question_text: Option<&str>,
) -> Result<Array1<f64>, EncoderError> {
    eval_vector(store, cfg, backend, Modality::Question, question_text.unwrap_or(""))
}

/// Empty skill sets embed as the exact zero vector; order never matters
/// because names are sorted before encoding.
pub fn encode_skills(
    store: &mut ParamStore,
    cfg: &EncoderConfig,
    backend: &EncoderBackend,
    skills: &SkillSet,
) -> Result<Array1<f64>, EncoderError> {
    eval_vector(store, cfg, backend, Modality::Skill, &skill_set_text(skills))
}

/// Value of the auxiliary response loss plus its empty-batch flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuestionResponseLoss {
    pub value: f64,
    pub empty_batch: bool,
    pub total_tokens: usize,
}

/// Token-normalized teacher-forced NLL over (question, response) pairs.
/// Pairs with empty responses are filtered; a batch with none left is 0 with
/// the flag set, keeping the total loss well-formed.
pub fn question_response_loss(
    store: &mut ParamStore,
    cfg: &EncoderConfig,
    pairs: &[(String, String)],
) -> QuestionResponseLoss {
    let mut fp = ForwardPass::eval(store);
    match response_loss_on_tape(&mut fp, cfg, pairs) {
        Some((node, tokens)) => QuestionResponseLoss {
            value: fp.tape.scalar(node),
            empty_batch: false,
            total_tokens: tokens,
        },
        None => QuestionResponseLoss {
            value: 0.0,
            empty_batch: true,
            total_tokens: 0,
        },
    }
}

/// Tape construction of the response loss; `None` when no valid pairs
/// remain. The value is `sum(NLL) / total_target_tokens`.
pub fn response_loss_on_tape(
    fp: &mut ForwardPass,
    cfg: &EncoderConfig,
    pairs: &[(String, String)],
) -> Option<(NodeId, usize)> {
    let mut nll_nodes = Vec::new();
    let mut total_tokens = 0usize;
    for (question, response) in pairs {
        if question.is_empty() || response.is_empty() {
            continue;
        }
        let enc = encode_states(fp, Modality::Question.prefix(), cfg, question)?;
        let (nll, tokens) = response_nll_sum(fp, "dec", cfg, enc, response);
        nll_nodes.push(nll);
        total_tokens += tokens;
    }
    if nll_nodes.is_empty() || total_tokens == 0 {
        return None;
    }
    let mut total = nll_nodes[0];
    for &n in &nll_nodes[1..] {
        total = fp.tape.add(total, n);
    }
    let normalized = fp.tape.scale(total, 1.0 / total_tokens as f64);
    Some((normalized, total_tokens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skill_set;
    use crate::skills::SkillTag;

    fn tiny_cfg() -> EncoderConfig {
        EncoderConfig {
            dim: 16,
            layers: 1,
            heads: 2,
            ff_dim: 32,
            max_len: 48,
            decoder_layers: 1,
        }
    }

    #[test]
    fn absent_question_is_exact_zero_vector() {
        let mut store = ParamStore::new(4);
        let cfg = tiny_cfg();
        let v = encode_question(&mut store, &cfg, &EncoderBackend::Trainable, None).unwrap();
        assert_eq!(v.len(), 16);
        assert!(v.iter().all(|&z| z == 0.0));
        let v2 =
            encode_question(&mut store, &cfg, &EncoderBackend::Trainable, Some("why?")).unwrap();
        assert!(v2.iter().map(|z| z * z).sum::<f64>() > 0.0);
    }

    #[test]
    fn skill_embedding_is_order_invariant_and_zero_for_empty() {
        let mut store = ParamStore::new(4);
        let cfg = tiny_cfg();
        let backend = EncoderBackend::Trainable;
        let a: SkillSet = skill_set![SkillTag::ForLoops, SkillTag::Operators];
        let b: SkillSet = skill_set![SkillTag::Operators, SkillTag::ForLoops];
        let va = encode_skills(&mut store, &cfg, &backend, &a).unwrap();
        let vb = encode_skills(&mut store, &cfg, &backend, &b).unwrap();
        assert_eq!(va, vb);
        let empty = encode_skills(&mut store, &cfg, &backend, &SkillSet::new()).unwrap();
        assert!(empty.iter().all(|&z| z == 0.0));
        let single: SkillSet = skill_set![SkillTag::NameError];
        let vs = encode_skills(&mut store, &cfg, &backend, &single).unwrap();
        assert!(vs.iter().map(|z| z * z).sum::<f64>() > 0.0);
    }

    #[test]
    fn dimensional_contract_holds_on_degenerate_inputs() {
        let mut store = ParamStore::new(4);
        let cfg = tiny_cfg();
        let backend = EncoderBackend::Trainable;
        for text in ["", "x", "아주 긴 한국어 텍스트와 code mixed()"] {
            assert_eq!(
                encode_problem(&mut store, &cfg, &backend, text).unwrap().len(),
                cfg.dim
            );
            assert_eq!(
                encode_code(&mut store, &cfg, &backend, text).unwrap().len(),
                cfg.dim
            );
        }
    }

    #[test]
    fn no_collisions_over_random_text_pairs() {
        let mut store = ParamStore::new(4);
        let cfg = tiny_cfg();
        let backend = EncoderBackend::Trainable;
        let mut seen = Vec::new();
        for i in 0..100 {
            let text = format!("description number {i} with extra words {}", i * 31 % 17);
            let v = encode_problem(&mut store, &cfg, &backend, &text).unwrap();
            for old in &seen {
                assert_ne!(&v, old, "collision at {i}");
            }
            seen.push(v);
        }
    }

    #[test]
    fn empty_pair_batch_flags_and_zeroes() {
        let mut store = ParamStore::new(4);
        let cfg = tiny_cfg();
        let out = question_response_loss(&mut store, &cfg, &[]);
        assert!(out.empty_batch);
        assert_eq!(out.value, 0.0);
        let out = question_response_loss(
            &mut store,
            &cfg,
            &[("question".into(), String::new())],
        );
        assert!(out.empty_batch);
    }

    #[test]
    fn response_loss_is_finite_and_positive() {
        let mut store = ParamStore::new(4);
        let cfg = tiny_cfg();
        let out = question_response_loss(
            &mut store,
            &cfg,
            &[
                ("why does my loop fail?".into(), "check the bound".into()),
                ("what is a dict?".into(), "key value store".into()),
            ],
        );
        assert!(!out.empty_batch);
        assert!(out.value.is_finite() && out.value > 0.0);
    }

    #[test]
    fn frozen_backend_serves_exact_vectors_and_errors_on_miss() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        let entries = vec![("known text".to_string(), vec![0.5f32; 16])];
        FrozenCache::write(&path, 16, &entries).unwrap();
        let cache = FrozenCache::load(&path).unwrap();
        let mut store = ParamStore::new(4);
        let cfg = tiny_cfg();
        let backend = EncoderBackend::Frozen(cache);
        let v = encode_problem(&mut store, &cfg, &backend, "known text").unwrap();
        assert!(v.iter().all(|&z| (z - 0.5).abs() < 1e-6));
        let err = encode_problem(&mut store, &cfg, &backend, "unknown").unwrap_err();
        assert!(matches!(err, EncoderError::MissingFrozenVector(_)));
    }
}
