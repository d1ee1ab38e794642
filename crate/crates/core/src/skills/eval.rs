//! Evaluation harness: micro-averaged precision/recall/F1 of the extractor
//! against hand-labeled gold questions.

use serde::Deserialize;

use super::taxonomy::{SkillSet, SkillTag};
use super::{Extractor, SkillError};

/// One gold item: a raw question and the skills a human annotator assigned.
#[derive(Debug, Clone, Deserialize)]
pub struct GoldAnnotation {
    pub question_text: String,
    pub gold_skills: SkillSet,
    /// Questions that genuinely carry no skill (greetings, "please help")
    /// are allowed an empty gold set only when flagged.
    #[serde(default)]
    pub skill_free: bool,
}

/// Micro-averaged scores over (question, skill) instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractorScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a zero denominator forced a score to 0.
    pub zero_denominator: bool,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Parse gold annotations from JSONL, validating the nonempty-unless-flagged
/// invariant.
pub fn load_gold_annotations(jsonl: &str) -> Result<Vec<GoldAnnotation>, SkillError> {
    let mut out = Vec::new();
    for (idx, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ann: GoldAnnotation =
            serde_json::from_str(line).map_err(|e| SkillError::InvalidGoldAnnotation {
                index: idx + 1,
                message: e.to_string(),
            })?;
        if ann.gold_skills.is_empty() && !ann.skill_free {
            return Err(SkillError::InvalidGoldAnnotation {
                index: idx + 1,
                message: "empty gold_skills without skill_free flag".into(),
            });
        }
        if ann.question_text.trim().is_empty() {
            return Err(SkillError::InvalidGoldAnnotation {
                index: idx + 1,
                message: "empty question_text".into(),
            });
        }
        out.push(ann);
    }
    Ok(out)
}

/// Runs the extractor over each gold question and scores micro P/R/F1.
pub fn evaluate_extractor(extractor: &Extractor, gold: &[GoldAnnotation]) -> ExtractorScore {
    assert!(!gold.is_empty(), "gold corpus must be nonempty");
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for ann in gold {
        let predicted = extractor.extract_from_question(&ann.question_text);
        score_item(&predicted, &ann.gold_skills, &mut tp, &mut fp, &mut fn_);
    }
    finalize(tp, fp, fn_)
}

/// Scoring from precomputed predictions, for callers that already ran the
/// extractor.
pub fn score_predictions(pairs: &[(SkillSet, SkillSet)]) -> ExtractorScore {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (predicted, gold) in pairs {
        score_item(predicted, gold, &mut tp, &mut fp, &mut fn_);
    }
    finalize(tp, fp, fn_)
}

fn score_item(predicted: &SkillSet, gold: &SkillSet, tp: &mut usize, fp: &mut usize, fn_: &mut usize) {
    for tag in SkillTag::ALL {
        let p = predicted.contains(*tag);
        let g = gold.contains(*tag);
        match (p, g) {
            (true, true) => *tp += 1,
            (true, false) => *fp += 1,
            (false, true) => *fn_ += 1,
            (false, false) => {}
        }
    }
}

fn finalize(tp: usize, fp: usize, fn_: usize) -> ExtractorScore {
    let mut zero = false;
    let precision = if tp + fp == 0 {
        zero = true;
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        zero = true;
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        zero = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ExtractorScore {
        precision,
        recall,
        f1,
        zero_denominator: zero,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    }
}
