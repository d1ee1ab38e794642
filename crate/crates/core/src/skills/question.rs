//! Question segmentation: students freely mix prose, code, and pasted
//! tracebacks in one message. Each line is classified, contiguous lines are
//! grouped, and the three extractors run over their own segments.

use std::sync::OnceLock;

use regex::Regex;

use super::rules::RuleTable;
use super::taxonomy::SkillSet;
use super::{code, text, traceback, Extractor};

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Segments {
    /// One entry per contiguous code block (including traceback source
    /// context lines).
    pub code: Vec<String>,
    /// One entry per contiguous traceback block.
    pub traceback: Vec<String>,
    /// One entry per contiguous prose run.
    pub prose: Vec<String>,
}

fn file_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"^\s*File ".*", line \d+"#).expect("static regex"))
}

fn code_start_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^\s*(def|for|while|if|elif|else|import|from|return|print|input|try|except|with|class|global|nonlocal)\b",
        )
        .expect("static regex")
    })
}

fn is_traceback_line(table: &RuleTable, line: &str) -> bool {
    if line.contains("Traceback (most recent call last") || file_line_re().is_match(line) {
        return true;
    }
    let trimmed = line.trim();
    table.error_names().iter().any(|(name, _)| {
        traceback::line_names_error(line, name) || trimmed.ends_with(name.as_str())
    })
}

/// A plain or augmented assignment `=`; comparison operators do not count.
fn has_assignment(line: &str) -> bool {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'=' {
            let prev = if i > 0 { bytes[i - 1] } else { b' ' };
            let next = if i + 1 < bytes.len() { bytes[i + 1] } else { b' ' };
            if next != b'=' && !matches!(prev, b'=' | b'!' | b'<' | b'>') {
                return true;
            }
        }
    }
    false
}

fn looks_like_code(line: &str) -> bool {
    let t = line.trim_end();
    let trimmed = t.trim_start();
    if trimmed.is_empty() || trimmed.ends_with('?') {
        return false;
    }
    let mut score = 0usize;
    if has_assignment(trimmed) {
        score += 2;
    }
    if trimmed.contains('(') && trimmed.contains(')') {
        score += 1;
    }
    if trimmed.contains('[') && trimmed.contains(']') {
        score += 1;
    }
    if trimmed.ends_with(':') {
        score += 1;
    }
    if trimmed
        .chars()
        .any(|c| matches!(c, '+' | '*' | '/' | '%' | '<' | '>'))
    {
        score += 1;
    }
    if line.starts_with("    ") || line.starts_with('\t') {
        score += 1;
    }
    let starts_kw = code_start_re().is_match(trimmed);
    (starts_kw && score >= 1) || score >= 2
}

/// Two or more code-ish tokens and balanced brackets; blocks that fail are
/// reclassified as prose.
fn plausible_code_block(block: &str) -> bool {
    let mut code_tokens = 0usize;
    let mut depth: i64 = 0;
    let mut balanced = true;
    let mut in_str: Option<char> = None;
    for ch in block.chars() {
        if let Some(q) = in_str {
            if ch == q {
                in_str = None;
            }
            continue;
        }
        match ch {
            '"' | '\'' => {
                in_str = Some(ch);
                code_tokens += 1;
            }
            '(' | '[' | '{' => {
                depth += 1;
                code_tokens += 1;
            }
            ')' | ']' | '}' => {
                depth -= 1;
                if depth < 0 {
                    balanced = false;
                }
                code_tokens += 1;
            }
            '=' | '+' | '*' | '/' | '%' | '<' | '>' | ':' => code_tokens += 1,
            _ => {}
        }
    }
    balanced && depth == 0 && code_tokens >= 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineKind {
    Traceback,
    Code,
    Prose,
    Blank,
}

pub(crate) fn segment(table: &RuleTable, question_text: &str) -> Segments {
    let lines: Vec<&str> = question_text.lines().collect();
    let mut kinds = vec![LineKind::Blank; lines.len()];
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if line.trim().is_empty() {
            kinds[i] = LineKind::Blank;
        } else if is_traceback_line(table, line) {
            kinds[i] = LineKind::Traceback;
            // The source-context line under a `File "...", line N` header is
            // code, not traceback prose.
            if file_line_re().is_match(line) {
                if let Some(next) = lines.get(i + 1) {
                    if !next.trim().is_empty() && !is_traceback_line(table, next) {
                        kinds[i + 1] = LineKind::Code;
                        i += 2;
                        continue;
                    }
                }
            }
        } else if looks_like_code(line) {
            kinds[i] = LineKind::Code;
        } else {
            kinds[i] = LineKind::Prose;
        }
        i += 1;
    }

    let mut segments = Segments::default();
    let mut run_kind = LineKind::Blank;
    let mut run: Vec<&str> = Vec::new();
    let flush = |kind: LineKind, run: &mut Vec<&str>, segments: &mut Segments| {
        if run.is_empty() {
            return;
        }
        let joined = run.join("\n");
        match kind {
            LineKind::Code => {
                if plausible_code_block(&joined) {
                    segments.code.push(joined);
                } else {
                    segments.prose.push(joined);
                }
            }
            LineKind::Traceback => segments.traceback.push(joined),
            LineKind::Prose => segments.prose.push(joined),
            LineKind::Blank => {}
        }
        run.clear();
    };
    for (idx, &kind) in kinds.iter().enumerate() {
        if kind != run_kind {
            flush(run_kind, &mut run, &mut segments);
            run_kind = kind;
        }
        if kind != LineKind::Blank {
            run.push(lines[idx]);
        }
    }
    flush(run_kind, &mut run, &mut segments);
    segments
}

pub(crate) fn extract(extractor: &Extractor, question_text: &str) -> SkillSet {
    let table = extractor.rules();
    let segments = segment(table, question_text);
    let mut out = SkillSet::new();
    for block in &segments.code {
        out.union_with(&code::extract(table, block));
    }
    for block in &segments.traceback {
        out.union_with(&traceback::extract(table, block));
    }
    for block in &segments.prose {
        out.union_with(&text::extract(table, block));
    }
    out
}
