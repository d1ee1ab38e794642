//! The declarative rule table backing every extractor.
//!
//! Rules live in a versioned JSON file. Three kinds exist: `code-syntax`
//! rules keyed by walker events, `error-name` rules keyed by error class
//! names, and `text-lexicon` rules holding bilingual keyword lists or a
//! regex. Rules are pure data; all matching logic lives in the extractors.

use std::collections::HashMap;

use regex::Regex;
use serde::Deserialize;

use super::code::CodeEvent;
use super::taxonomy::{canonicalize_skill_name, SkillSet, SkillTag};
use super::SkillError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SourceKind {
    #[serde(rename = "code-syntax")]
    CodeSyntax,
    #[serde(rename = "error-name")]
    ErrorName,
    #[serde(rename = "text-lexicon")]
    TextLexicon,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RulePattern {
    Event { event: String },
    Error { error: String },
    Keywords { keywords: Vec<String> },
    Regex { regex: String },
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExtractionRule {
    pub rule_id: String,
    pub source_kind: SourceKind,
    pub pattern: RulePattern,
    pub emits: String,
}

#[derive(Debug, Deserialize)]
struct RuleFile {
    version: u32,
    rules: Vec<ExtractionRule>,
}

/// One preprocessed lexicon keyword: Latin keywords match on token
/// boundaries case-insensitively, Hangul keywords match as substrings.
#[derive(Debug, Clone)]
pub(crate) enum Keyword {
    LatinTokens(Vec<String>),
    HangulSubstring(String),
}

#[derive(Debug)]
pub(crate) struct LexiconEntry {
    pub keywords: Vec<Keyword>,
    pub emits: SkillTag,
}

#[derive(Debug)]
pub struct RuleTable {
    version: u32,
    rules: Vec<ExtractionRule>,
    by_event: HashMap<CodeEvent, Vec<SkillTag>>,
    error_names: Vec<(String, SkillTag)>,
    lexicon: Vec<LexiconEntry>,
    regexes: Vec<(Regex, SkillTag)>,
}

fn contains_hangul(s: &str) -> bool {
    s.chars().any(|c| {
        let u = c as u32;
        (0xAC00..=0xD7AF).contains(&u) || (0x1100..=0x11FF).contains(&u) || (0x3130..=0x318F).contains(&u)
    })
}

fn is_hangul(c: char) -> bool {
    let u = c as u32;
    (0xAC00..=0xD7AF).contains(&u) || (0x1100..=0x11FF).contains(&u) || (0x3130..=0x318F).contains(&u)
}

/// Tokens split on non-alphanumerics and on Latin/Hangul script boundaries,
/// so particles glued onto Latin words ("if문") still expose the Latin part.
pub(crate) fn latin_tokens(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut cur_hangul = false;
    for ch in s.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            let h = is_hangul(ch);
            if !cur.is_empty() && h != cur_hangul {
                tokens.push(std::mem::take(&mut cur));
            }
            cur_hangul = h;
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

impl RuleTable {
    pub fn from_json(json: &str) -> Result<Self, SkillError> {
        let file: RuleFile = serde_json::from_str(json)
            .map_err(|e| SkillError::InvalidRuleTable(e.to_string()))?;
        Self::build(file.version, file.rules)
    }

    fn build(version: u32, rules: Vec<ExtractionRule>) -> Result<Self, SkillError> {
        let mut by_event: HashMap<CodeEvent, Vec<SkillTag>> = HashMap::new();
        let mut error_names = Vec::new();
        let mut lexicon = Vec::new();
        let mut regexes = Vec::new();
        let mut seen_ids = std::collections::HashSet::new();
        let mut emitted: std::collections::BTreeSet<SkillTag> = Default::default();

        for rule in &rules {
            if !seen_ids.insert(rule.rule_id.clone()) {
                return Err(SkillError::InvalidRuleTable(format!(
                    "duplicate rule_id {:?}",
                    rule.rule_id
                )));
            }
            let emits = canonicalize_skill_name(&rule.emits)?;
            emitted.insert(emits);
            match (&rule.source_kind, &rule.pattern) {
                (SourceKind::CodeSyntax, RulePattern::Event { event }) => {
                    let ev = CodeEvent::parse(event).ok_or_else(|| {
                        SkillError::InvalidRuleTable(format!(
                            "rule {:?}: unknown code event {event:?}",
                            rule.rule_id
                        ))
                    })?;
                    by_event.entry(ev).or_default().push(emits);
                }
                (SourceKind::ErrorName, RulePattern::Error { error }) => {
                    if error.is_empty() {
                        return Err(SkillError::InvalidRuleTable(format!(
                            "rule {:?}: empty error name",
                            rule.rule_id
                        )));
                    }
                    error_names.push((error.clone(), emits));
                }
                (SourceKind::TextLexicon, RulePattern::Keywords { keywords }) => {
                    if keywords.is_empty() {
                        return Err(SkillError::InvalidRuleTable(format!(
                            "rule {:?}: empty keyword list",
                            rule.rule_id
                        )));
                    }
                    let kws = keywords
                        .iter()
                        .map(|k| {
                            if contains_hangul(k) {
                                Keyword::HangulSubstring(k.clone())
                            } else {
                                Keyword::LatinTokens(latin_tokens(k))
                            }
                        })
                        .collect();
                    lexicon.push(LexiconEntry { keywords: kws, emits });
                }
                (SourceKind::TextLexicon, RulePattern::Regex { regex }) => {
                    let re = Regex::new(regex).map_err(|e| {
                        SkillError::InvalidRuleTable(format!(
                            "rule {:?}: bad regex: {e}",
                            rule.rule_id
                        ))
                    })?;
                    regexes.push((re, emits));
                }
                _ => {
                    return Err(SkillError::InvalidRuleTable(format!(
                        "rule {:?}: pattern does not match source_kind",
                        rule.rule_id
                    )));
                }
            }
        }

        for &tag in SkillTag::ALL {
            if !emitted.contains(&tag) {
                return Err(SkillError::InvalidRuleTable(format!(
                    "tag {:?} is not emitted by any rule",
                    tag.canonical_name()
                )));
            }
        }

        Ok(Self {
            version,
            rules,
            by_event,
            error_names,
            lexicon,
            regexes,
        })
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn rules(&self) -> &[ExtractionRule] {
        &self.rules
    }

    pub(crate) fn tags_for_event(&self, event: CodeEvent, out: &mut SkillSet) {
        if let Some(tags) = self.by_event.get(&event) {
            for &t in tags {
                out.insert(t);
            }
        }
    }

    pub(crate) fn error_names(&self) -> &[(String, SkillTag)] {
        &self.error_names
    }

    pub(crate) fn lexicon(&self) -> &[LexiconEntry] {
        &self.lexicon
    }

    pub(crate) fn regexes(&self) -> &[(Regex, SkillTag)] {
        &self.regexes
    }
}
