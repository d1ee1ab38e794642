//! The closed skill taxonomy: 32 Python concepts and 19 runtime error types.
//!
//! Every extractor in this crate maps into this set and nothing else. Tags
//! carry a fixed canonical display name; free-form labels from external data
//! are reconciled through [`canonicalize_skill_name`].

use std::collections::BTreeSet;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SkillError;

/// Whether a tag names a language concept or a runtime error class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillCategory {
    Concept,
    Error,
}

macro_rules! skill_tags {
    ($( $variant:ident => ($name:literal, $cat:ident) ),+ $(,)?) => {
        /// One entry of the closed 51-tag taxonomy.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum SkillTag {
            $( $variant, )+
        }

        impl SkillTag {
            /// Every tag in taxonomy order (concepts first, then errors).
            pub const ALL: &'static [SkillTag] = &[ $( SkillTag::$variant, )+ ];

            /// The fixed display name, spelled exactly as the taxonomy defines it.
            pub fn canonical_name(self) -> &'static str {
                match self {
                    $( SkillTag::$variant => $name, )+
                }
            }

            pub fn category(self) -> SkillCategory {
                match self {
                    $( SkillTag::$variant => SkillCategory::$cat, )+
                }
            }
        }
    };
}

skill_tags! {
    Value => ("Value", Concept),
    VariableAssign => ("Variable Assign", Concept),
    Keywords => ("Keywords", Concept),
    Operators => ("Operators", Concept),
    Operands => ("Operands", Concept),
    TypeConvertor => ("Type Convertor", Concept),
    InputFunction => ("input function", Concept),
    PrintFunction => ("print function", Concept),
    BooleanValues => ("Boolean Values", Concept),
    BooleanExpressions => ("Boolean Expressions", Concept),
    LogicalOperators => ("Logical Operators", Concept),
    IfElseStatements => ("If-Else Statements", Concept),
    ForLoops => ("For Loops", Concept),
    WhileLoops => ("While Loops", Concept),
    BreakStatement => ("Break Statement", Concept),
    ContinueStatement => ("Continue Statement", Concept),
    FunctionDefinitions => ("Function Definitions", Concept),
    ReturnStatement => ("return Statement", Concept),
    LocalGlobalScope => ("Local/Global Scope", Concept),
    Strings => ("Strings", Concept),
    StringSlicing => ("String Slicing", Concept),
    Indexing => ("Indexing", Concept),
    Lists => ("Lists", Concept),
    Dictionaries => ("Dictionaries", Concept),
    ImportStatement => ("Import Statement", Concept),
    RandomModule => ("random", Concept),
    TimeModule => ("time", Concept),
    MathModule => ("math", Concept),
    OpeningFiles => ("Opening files", Concept),
    ReadingFiles => ("Reading files", Concept),
    WritingFiles => ("Writing files", Concept),
    ClosingFiles => ("Closing files", Concept),
    SyntaxError => ("SyntaxError", Error),
    NameError => ("NameError", Error),
    TypeError => ("TypeError", Error),
    IndentationError => ("IndentationError", Error),
    ValueError => ("ValueError", Error),
    AttributeError => ("AttributeError", Error),
    IndexError => ("IndexError", Error),
    KeyError => ("KeyError", Error),
    TabError => ("TabError", Error),
    UnicodeDecodeError => ("UnicodeDecodeError", Error),
    FileNotFoundError => ("FileNotFoundError", Error),
    ModuleNotFoundError => ("ModuleNotFoundError", Error),
    ZeroDivisionError => ("ZeroDivisionError", Error),
    UnboundLocalError => ("UnboundLocalError", Error),
    ImportError => ("ImportError", Error),
    UnicodeEncodeError => ("UnicodeEncodeError", Error),
    LookupError => ("LookupError", Error),
    ConnectionError => ("ConnectionError", Error),
    RuntimeError => ("RuntimeError", Error),
}

impl fmt::Display for SkillTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

impl Serialize for SkillTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.canonical_name())
    }
}

impl<'de> Deserialize<'de> for SkillTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        canonicalize_skill_name(&raw).map_err(D::Error::custom)
    }
}

/// Collapse a label to its matching key: case-folded, with hyphens, slashes,
/// commas and underscores treated as spaces, and runs of spaces squeezed.
fn normalize_label(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last_space = true;
    for ch in raw.chars() {
        let mapped = match ch {
            '-' | '/' | ',' | '_' => ' ',
            c => c,
        };
        if mapped.is_whitespace() {
            if !last_space {
                out.push(' ');
                last_space = true;
            }
        } else {
            for lc in mapped.to_lowercase() {
                out.push(lc);
            }
            last_space = false;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Drop a plural `s` from the final word, so "while loops" also matches
/// "while loop".
fn depluralize(normalized: &str) -> Option<String> {
    let last = normalized.rsplit(' ').next()?;
    if last.len() > 2 && last.ends_with('s') && !last.ends_with("ss") {
        let mut s = normalized.to_string();
        s.pop();
        Some(s)
    } else {
        None
    }
}

/// Extra spellings seen in annotation exports that normalization alone does
/// not reconcile.
const ALIASES: &[(&str, SkillTag)] = &[
    ("variable", SkillTag::VariableAssign),
    ("variable assignment", SkillTag::VariableAssign),
    ("assignment", SkillTag::VariableAssign),
    ("type converter", SkillTag::TypeConvertor),
    ("type conversion", SkillTag::TypeConvertor),
    ("if else", SkillTag::IfElseStatements),
    ("if else statement", SkillTag::IfElseStatements),
    ("conditionals", SkillTag::IfElseStatements),
    ("for loop", SkillTag::ForLoops),
    ("while loop", SkillTag::WhileLoops),
    ("boolean value", SkillTag::BooleanValues),
    ("boolean", SkillTag::BooleanValues),
    ("logical operator", SkillTag::LogicalOperators),
    ("string", SkillTag::Strings),
    ("slicing", SkillTag::StringSlicing),
    ("string slice", SkillTag::StringSlicing),
    ("index", SkillTag::Indexing),
    ("list", SkillTag::Lists),
    ("dictionary", SkillTag::Dictionaries),
    ("dict", SkillTag::Dictionaries),
    ("import", SkillTag::ImportStatement),
    ("function definition", SkillTag::FunctionDefinitions),
    ("function", SkillTag::FunctionDefinitions),
    ("return", SkillTag::ReturnStatement),
    ("scope", SkillTag::LocalGlobalScope),
    ("local global scope", SkillTag::LocalGlobalScope),
    ("break", SkillTag::BreakStatement),
    ("continue", SkillTag::ContinueStatement),
    ("operator", SkillTag::Operators),
    ("operand", SkillTag::Operands),
    ("open file", SkillTag::OpeningFiles),
    ("read file", SkillTag::ReadingFiles),
    ("write file", SkillTag::WritingFiles),
    ("close file", SkillTag::ClosingFiles),
];

/// Resolve a free-form skill label to its taxonomy tag.
///
/// Matching order: exact canonical name, normalized canonical name,
/// depluralized form, then the alias table. Unknown labels are an error; the
/// taxonomy is a closed set.
pub fn canonicalize_skill_name(raw: &str) -> Result<SkillTag, SkillError> {
    let raw_trim = raw.trim();
    if raw_trim.is_empty() {
        return Err(SkillError::UnknownLabel(raw.to_string()));
    }
    for &tag in SkillTag::ALL {
        if tag.canonical_name() == raw_trim {
            return Ok(tag);
        }
    }
    let norm = normalize_label(raw_trim);
    for &tag in SkillTag::ALL {
        let canon_norm = normalize_label(tag.canonical_name());
        if canon_norm == norm {
            return Ok(tag);
        }
        if let Some(dep) = depluralize(&canon_norm) {
            if dep == norm {
                return Ok(tag);
            }
        }
    }
    let dep_norm = depluralize(&norm);
    for &(alias, tag) in ALIASES {
        if alias == norm || dep_norm.as_deref() == Some(alias) {
            return Ok(tag);
        }
    }
    Err(SkillError::UnknownLabel(raw_trim.to_string()))
}

/// An unordered, deduplicated set of taxonomy tags.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkillSet(BTreeSet<SkillTag>);

impl SkillSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tag: SkillTag) -> bool {
        self.0.insert(tag)
    }

    pub fn contains(&self, tag: SkillTag) -> bool {
        self.0.contains(&tag)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn union_with(&mut self, other: &SkillSet) {
        self.0.extend(other.0.iter().copied());
    }

    pub fn is_superset(&self, other: &SkillSet) -> bool {
        other.0.iter().all(|t| self.0.contains(t))
    }

    pub fn iter(&self) -> impl Iterator<Item = SkillTag> + '_ {
        self.0.iter().copied()
    }

    /// Canonical names sorted alphabetically; the text form used when a skill
    /// set is embedded as a single string.
    pub fn sorted_names(&self) -> Vec<&'static str> {
        let mut names: Vec<_> = self.0.iter().map(|t| t.canonical_name()).collect();
        names.sort_unstable();
        names
    }

    /// The sorted names joined with `", "`; empty sets yield an empty string.
    pub fn joined_text(&self) -> String {
        self.sorted_names().join(", ")
    }
}

impl FromIterator<SkillTag> for SkillSet {
    fn from_iter<I: IntoIterator<Item = SkillTag>>(iter: I) -> Self {
        SkillSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a SkillSet {
    type Item = SkillTag;
    type IntoIter = std::iter::Copied<std::collections::btree_set::Iter<'a, SkillTag>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

impl fmt::Display for SkillSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined_text())
    }
}

impl Serialize for SkillSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let names: Vec<&str> = self.sorted_names();
        names.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SkillSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(deserializer)?;
        let mut set = SkillSet::new();
        for name in names {
            set.insert(canonicalize_skill_name(&name).map_err(D::Error::custom)?);
        }
        Ok(set)
    }
}

#[macro_export]
macro_rules! skill_set {
    ($($tag:expr),* $(,)?) => {{
        let mut s = $crate::skills::SkillSet::new();
        $( s.insert($tag); )*
        s
    }};
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taxonomy_has_51_tags_split_32_19() {
        assert_eq!(SkillTag::ALL.len(), 51);
        let concepts = SkillTag::ALL
            .iter()
            .filter(|t| t.category() == SkillCategory::Concept)
            .count();
        let errors = SkillTag::ALL
            .iter()
            .filter(|t| t.category() == SkillCategory::Error)
            .count();
        assert_eq!(concepts, 32);
        assert_eq!(errors, 19);
    }

    #[test]
    fn canonical_names_are_unique() {
        let mut seen = std::collections::HashSet::new();
        for tag in SkillTag::ALL {
            assert!(seen.insert(tag.canonical_name()), "dup {tag}");
        }
    }

    #[test]
    fn canonicalize_appendix_spellings() {
        assert_eq!(
            canonicalize_skill_name("While-loop").unwrap(),
            SkillTag::WhileLoops
        );
        assert_eq!(
            canonicalize_skill_name("While Loops").unwrap(),
            SkillTag::WhileLoops
        );
        assert_eq!(
            canonicalize_skill_name("Print function").unwrap(),
            SkillTag::PrintFunction
        );
        assert_eq!(
            canonicalize_skill_name("Operator").unwrap(),
            SkillTag::Operators
        );
        assert_eq!(canonicalize_skill_name("String").unwrap(), SkillTag::Strings);
        assert_eq!(
            canonicalize_skill_name("Variable").unwrap(),
            SkillTag::VariableAssign
        );
        assert_eq!(
            canonicalize_skill_name("Local, Global Scope").unwrap(),
            SkillTag::LocalGlobalScope
        );
    }

    #[test]
    fn canonicalize_rejects_unknown() {
        assert!(matches!(
            canonicalize_skill_name("Quantum Widgets"),
            Err(SkillError::UnknownLabel(_))
        ));
        assert!(canonicalize_skill_name("").is_err());
    }

    #[test]
    fn canonicalize_is_idempotent() {
        for &tag in SkillTag::ALL {
            let once = canonicalize_skill_name(tag.canonical_name()).unwrap();
            let twice = canonicalize_skill_name(once.canonical_name()).unwrap();
            assert_eq!(once, twice);
            assert_eq!(once, tag);
        }
    }

    #[test]
    fn skill_set_orders_and_dedups() {
        let set: SkillSet = [SkillTag::Operators, SkillTag::ForLoops, SkillTag::Operators]
            .into_iter()
            .collect();
        assert_eq!(set.len(), 2);
        assert_eq!(set.joined_text(), "For Loops, Operators");
    }

    #[test]
    fn skill_set_serde_round_trips() {
        let set: SkillSet = [SkillTag::NameError, SkillTag::Value].into_iter().collect();
        let json = serde_json::to_string(&set).unwrap();
        assert_eq!(json, r#"["NameError","Value"]"#);
        let back: SkillSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
    }
}
