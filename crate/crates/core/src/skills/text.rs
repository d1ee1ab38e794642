//! Lexicon-based extraction from natural-language prose.
//!
//! Latin-script keywords match whole tokens case-insensitively; multi-word
//! keywords match consecutive token runs. Hangul keywords match as raw
//! substrings, which tolerates Korean particles glued to the stem.

use super::rules::{latin_tokens, Keyword, RuleTable};
use super::taxonomy::SkillSet;

fn tokens_contain(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || haystack.len() < needle.len() {
        return false;
    }
    haystack
        .windows(needle.len())
        .any(|w| w.iter().zip(needle).all(|(a, b)| a == b))
}

pub(crate) fn extract(table: &RuleTable, text: &str) -> SkillSet {
    let mut out = SkillSet::new();
    if text.trim().is_empty() {
        return out;
    }
    let toks = latin_tokens(text);
    for entry in table.lexicon() {
        if out.contains(entry.emits) {
            continue;
        }
        let hit = entry.keywords.iter().any(|kw| match kw {
            Keyword::LatinTokens(needle) => tokens_contain(&toks, needle),
            Keyword::HangulSubstring(s) => text.contains(s.as_str()),
        });
        if hit {
            out.insert(entry.emits);
        }
    }
    for (re, tag) in table.regexes() {
        if re.is_match(text) {
            out.insert(*tag);
        }
    }
    out
}
