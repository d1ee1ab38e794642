//! Error-type extraction from traceback-shaped text.

use super::rules::RuleTable;
use super::taxonomy::SkillSet;

// Error class names are ASCII; a Hangul particle glued on ("SyntaxError가")
// still counts as a boundary.
fn is_word_boundary(c: Option<char>) -> bool {
    match c {
        None => true,
        Some(c) => !(c.is_ascii_alphanumeric() || c == '_'),
    }
}

/// True when `name` occurs in `line` as a whole word that is followed by a
/// colon (spaces allowed) or sits at the start of the line.
pub(crate) fn line_names_error(line: &str, name: &str) -> bool {
    let trimmed = line.trim_start();
    let mut search_from = 0;
    while let Some(rel) = line[search_from..].find(name) {
        let start = search_from + rel;
        let end = start + name.len();
        let before = line[..start].chars().next_back();
        let after = line[end..].chars().next();
        if is_word_boundary(before) && is_word_boundary(after) {
            let at_line_start = trimmed.starts_with(name) && start == line.len() - trimmed.len();
            let followed_by_colon = line[end..].trim_start().starts_with(':');
            if at_line_start || followed_by_colon {
                return true;
            }
        }
        search_from = end;
    }
    false
}

pub(crate) fn extract(table: &RuleTable, text: &str) -> SkillSet {
    let mut out = SkillSet::new();
    for line in text.lines() {
        for (name, tag) in table.error_names() {
            if line_names_error(line, name) {
                out.insert(*tag);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{Extractor, SkillSet, SkillTag};
    use crate::skill_set;

    fn ex() -> &'static Extractor {
        Extractor::bundled()
    }

    #[test]
    fn name_error_line_is_exact() {
        let got = ex().extract_from_traceback("NameError: name 'James Bond' is not defined");
        let want: SkillSet = skill_set![SkillTag::NameError];
        assert_eq!(got, want);
    }

    #[test]
    fn plain_text_yields_nothing() {
        assert!(ex().extract_from_traceback("no error here").is_empty());
    }

    #[test]
    fn multiple_error_names_with_colons() {
        let got = ex()
            .extract_from_traceback("first TypeError: bad operand\nthen ValueError: bad value");
        let want: SkillSet = skill_set![SkillTag::TypeError, SkillTag::ValueError];
        assert_eq!(got, want);
    }

    #[test]
    fn substring_matches_are_rejected() {
        // "MyTypeErrors" must not count as TypeError.
        assert!(ex().extract_from_traceback("MyTypeErrors: odd").is_empty());
        // Mid-line mention without a colon does not count either.
        assert!(ex()
            .extract_from_traceback("I think the TypeError went away")
            .is_empty());
    }

    #[test]
    fn full_traceback_block() {
        let tb = "Traceback (most recent call last):\n  File \"main.py\", line 8, in <module>\n    print[17, James Bond]\nNameError: name 'James Bond' is not defined";
        let got = ex().extract_from_traceback(tb);
        assert_eq!(got, skill_set![SkillTag::NameError]);
    }
}
