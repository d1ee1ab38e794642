//! Rule-based skill extraction.
//!
//! Maps student questions, source code, and interpreter tracebacks onto the
//! closed 51-tag taxonomy. All extractors are pure functions over an
//! immutable rule table, so they are safe to call from any number of threads.

mod code;
mod eval;
mod question;
mod rules;
mod taxonomy;
mod text;
mod traceback;

pub use code::CodeEvent;
pub use eval::{
    evaluate_extractor, load_gold_annotations, score_predictions, ExtractorScore, GoldAnnotation,
};
pub use question::Segments;
pub use rules::{ExtractionRule, RulePattern, RuleTable, SourceKind};
pub use taxonomy::{canonicalize_skill_name, SkillCategory, SkillSet, SkillTag};

use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SkillError {
    #[error("unknown skill label: {0:?}")]
    UnknownLabel(String),
    #[error("invalid rule table: {0}")]
    InvalidRuleTable(String),
    #[error("reference solution does not parse: {0}")]
    UnparseableSolution(String),
    #[error("gold annotation {index}: {message}")]
    InvalidGoldAnnotation { index: usize, message: String },
}

/// The bundled rule table, checked into the repo as a versioned JSON asset.
pub const BUNDLED_RULES_JSON: &str = include_str!("../../assets/skill_rules.json");

/// The bundled gold mini-corpus of hand-labeled questions.
pub const BUNDLED_GOLD_JSONL: &str = include_str!("../../assets/gold_questions.jsonl");

/// A skill extractor bound to a rule table.
#[derive(Debug)]
pub struct Extractor {
    rules: RuleTable,
}

impl Extractor {
    pub fn new(rules: RuleTable) -> Self {
        Self { rules }
    }

    /// The extractor over the bundled rule table. Panics only if the bundled
    /// asset is malformed, which the test suite guards against.
    pub fn bundled() -> &'static Extractor {
        static INSTANCE: OnceLock<Extractor> = OnceLock::new();
        INSTANCE.get_or_init(|| {
            let rules = RuleTable::from_json(BUNDLED_RULES_JSON)
                .expect("bundled skill_rules.json must be valid");
            Extractor::new(rules)
        })
    }

    pub fn rules(&self) -> &RuleTable {
        &self.rules
    }

    /// Skills evidenced by a piece of (possibly invalid) Python source.
    ///
    /// Valid source is parsed and walked; invalid source falls back to
    /// token-level rules for the same constructs. Parse failure alone never
    /// emits an error-type tag.
    pub fn extract_from_code(&self, code_text: &str) -> SkillSet {
        code::extract(&self.rules, code_text)
    }

    /// Error-type tags named in traceback-shaped text: a whole word followed
    /// by `:` or sitting at the start of a line.
    pub fn extract_from_traceback(&self, text: &str) -> SkillSet {
        traceback::extract(&self.rules, text)
    }

    /// Lexicon hits in natural-language text, Korean or English or mixed.
    pub fn extract_from_text(&self, natural_language_text: &str) -> SkillSet {
        text::extract(&self.rules, natural_language_text)
    }

    /// Full question pipeline: segment into code, traceback, and prose parts,
    /// then union the three extractors over their segments.
    pub fn extract_from_question(&self, question_text: &str) -> SkillSet {
        question::extract(self, question_text)
    }

    /// Segmentation used by [`Self::extract_from_question`], exposed for
    /// inspection and tests.
    pub fn segment_question(&self, question_text: &str) -> Segments {
        question::segment(&self.rules, question_text)
    }

    /// Skills required by a problem, derived from its reference solution.
    /// Curated solutions must parse; anything else is an error.
    pub fn required_skills_for_problem(
        &self,
        reference_solution_code: &str,
    ) -> Result<SkillSet, SkillError> {
        code::required_skills(&self.rules, reference_solution_code)
    }
}
