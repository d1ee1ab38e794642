//! Synthetic corpus generator.
//!
//! Simulator semantics: every student carries a latent mastery vector over
//! all 51 skills and a hidden binary trait. Each problem requires a few
//! skills (derived from its generated reference solution). Submission scores
//! follow a logistic function of the mastery deficit on required skills, and
//! mastery rises with every attempt. Struggling students ask templated
//! questions naming their weakest required skill; the question template
//! family is the only place the hidden trait is visible. The
//! `question_signal_strength` knob `q` moves outcome weight from mastery
//! (q=0) to the trait (q=1), so at q=1 label-relevant information exists
//! only in question text.
//!
//! Generation is deterministic: one seeded stream per student, so parallel
//! generation reproduces serial output.

use std::fs;
use std::path::Path;

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::skills::{Extractor, SkillCategory, SkillTag};

use super::{
    Corpus, CorpusBuilder, CorpusError, CourseId, ProblemId, ProblemSpec, QuestionRecord,
    StudentId, SubmissionRecord,
};

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_students: usize,
    /// Problems per course.
    pub n_problems: usize,
    pub n_courses: usize,
    pub skills_per_problem_min: usize,
    pub skills_per_problem_max: usize,
    /// Per-attempt mastery gain toward 1.0 on the required skills.
    pub mastery_learning_rate: f64,
    /// q in [0,1]: how much label-relevant signal lives only in questions.
    pub question_signal_strength: f64,
    pub max_attempts: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_students: 200,
            n_problems: 6,
            n_courses: 1,
            skills_per_problem_min: 1,
            skills_per_problem_max: 3,
            mastery_learning_rate: 0.12,
            question_signal_strength: 0.5,
            max_attempts: 3,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: &str| Err(CorpusError::InvalidGenConfig(msg.to_string()));
        if self.n_courses == 0 {
            return bad("n_courses must be >= 1");
        }
        if self.n_students > 0 && self.n_problems == 0 {
            return bad("n_problems must be >= 1 when students exist");
        }
        if self.skills_per_problem_min == 0
            || self.skills_per_problem_min > self.skills_per_problem_max
            || self.skills_per_problem_max > 5
        {
            return bad("skills_per_problem must satisfy 1 <= min <= max <= 5");
        }
        if !(0.0..=1.0).contains(&self.mastery_learning_rate) {
            return bad("mastery_learning_rate must be in [0,1]");
        }
        if !(0.0..=1.0).contains(&self.question_signal_strength) {
            return bad("question_signal_strength must be in [0,1]");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be >= 1");
        }
        Ok(())
    }

    /// Flat key-value config file (TOML syntax without tables).
    pub fn from_toml_str(text: &str) -> Result<Self, CorpusError> {
        let cfg: GenConfig = toml::from_str(text)
            .map_err(|e| CorpusError::InvalidGenConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

/// Solution snippets per theme; required skills derive from the extractor
/// over the concatenation, so problems stay consistent by construction.
const THEMES: &[(&str, &str)] = &[
    ("counting with a for loop", "total = 0\nfor i in range(10):\n    total = total + i\nprint(total)"),
    ("draining a while loop", "count = int(input())\nwhile count > 0:\n    count = count - 1\nprint(count)"),
    ("branching on a condition", "flag = int(input())\nif flag == 1:\n    result = 'yes'\nelse:\n    result = 'no'\nprint(result)"),
    ("building a greeting string", "name = input()\ngreeting = 'hello ' + name\nprint(greeting)"),
    ("summing a list", "items = [1, 2, 3]\ntotal = sum(items)\nprint(total)"),
    ("looking up a dictionary", "ages = {'kim': 20, 'lee': 22}\nprint(ages['kim'])"),
    ("converting input to int", "raw = input()\nnumber = int(raw)\nprint(number)"),
    ("defining a helper function", "def double(x):\n    return x + x\nprint(double(2))"),
    ("slicing a string", "text = input()\npart = text[1:3]\nprint(part)"),
    ("indexing a list", "items = [4, 5, 6]\nfirst = items[0]\nprint(first)"),
    ("combining boolean flags", "a = True\nb = False\nboth = a and b\nprint(both)"),
    ("rolling a random number", "import random\npick = random.randint(1, 6)\nprint(pick)"),
    ("taking a square root", "import math\nroot = math.sqrt(16)\nprint(root)"),
    ("reading a file", "fh = open('data.txt')\ncontent = fh.read()\nfh.close()\nprint(content)"),
    ("breaking out of a loop", "for i in range(9):\n    if i == 3:\n        break\nprint(i)"),
];

/// An English mention phrase per concept that the text lexicon recognizes,
/// so generated questions extract back to the intended tag.
fn mention_phrase(tag: SkillTag) -> &'static str {
    use SkillTag::*;
    match tag {
        Value => "literal",
        VariableAssign => "variable",
        Keywords => "keyword",
        Operators => "operator",
        Operands => "operand",
        TypeConvertor => "type conversion",
        InputFunction => "input",
        PrintFunction => "print",
        BooleanValues => "boolean",
        BooleanExpressions => "boolean expression",
        LogicalOperators => "logical operator",
        IfElseStatements => "if",
        ForLoops => "for loop",
        WhileLoops => "while loop",
        BreakStatement => "break",
        ContinueStatement => "continue",
        FunctionDefinitions => "function definition",
        ReturnStatement => "return",
        LocalGlobalScope => "global",
        Strings => "string",
        StringSlicing => "slicing",
        Indexing => "indexing",
        Lists => "list",
        Dictionaries => "dictionary",
        ImportStatement => "import",
        RandomModule => "random",
        TimeModule => "time module",
        MathModule => "math module",
        OpeningFiles => "open a file",
        ReadingFiles => "read a file",
        WritingFiles => "write to a file",
        ClosingFiles => "close a file",
        other => other.canonical_name(),
    }
}

fn korean_phrase(tag: SkillTag) -> Option<&'static str> {
    use SkillTag::*;
    match tag {
        VariableAssign => Some("변수"),
        Operators => Some("연산자"),
        IfElseStatements => Some("조건문"),
        ForLoops => Some("포문"),
        WhileLoops => Some("와일문"),
        Strings => Some("문자열"),
        Lists => Some("리스트"),
        Dictionaries => Some("딕셔너리"),
        PrintFunction => Some("출력"),
        InputFunction => Some("입력"),
        _ => None,
    }
}

/// Traceback templates used by the struggle-style question family.
const STRUGGLE_ERRORS: &[(&str, &str)] = &[
    ("TypeError", "unsupported operand type(s) for +: 'int' and 'str'"),
    ("NameError", "name 'tmp' is not defined"),
    ("IndentationError", "unexpected indent"),
];

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 round over seed xor salt
    let mut z = seed ^ salt.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn generate_synthetic_corpus(config: &GenConfig, seed: u64) -> Result<Corpus, CorpusError> {
    config.validate()?;
    let extractor = Extractor::bundled();
    let mut builder = CorpusBuilder::new();
    if config.n_students == 0 {
        return builder.build();
    }

    // Problems per course, from a corpus-level stream.
    let mut problem_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x50524F42));
    let mut problems: Vec<ProblemSpec> = Vec::new();
    for course_idx in 0..config.n_courses {
        let course = CourseId::new(format!("course-{course_idx}"));
        for ordinal in 0..config.n_problems {
            let k = problem_rng
                .random_range(config.skills_per_problem_min..=config.skills_per_problem_max);
            let mut theme_ids: Vec<usize> = Vec::new();
            while theme_ids.len() < k {
                let t = problem_rng.random_range(0..THEMES.len());
                if !theme_ids.contains(&t) {
                    theme_ids.push(t);
                }
            }
            let titles: Vec<&str> = theme_ids.iter().map(|&t| THEMES[t].0).collect();
            let solution: String = theme_ids
                .iter()
                .map(|&t| THEMES[t].1)
                .collect::<Vec<_>>()
                .join("\n");
            let description = format!(
                "Task {ordinal}: practice {}. Read the input, follow the steps, and print the result exactly.",
                titles.join(" and ")
            );
            let problem = ProblemSpec::new(
                ProblemId::new(format!("course-{course_idx}-p{ordinal:02}")),
                course.clone(),
                ordinal as u32,
                description,
                solution,
                extractor,
            )?;
            problems.push(problem);
        }
    }
    for p in &problems {
        builder.push_problem(p.clone());
    }

    let q_strength = config.question_signal_strength;
    for student_idx in 0..config.n_students {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x53545544 + student_idx as u64));
        let student = StudentId::new(format!("s{student_idx:05}"));
        let course_idx = student_idx % config.n_courses;

        // Latent state.
        let mut mastery: Vec<f64> = SkillTag::ALL
            .iter()
            .map(|_| rng.random_range(0.15..0.85))
            .collect();
        let trait_sign: f64 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut now: u64 = 1;

        let course_problems = problems
            .iter()
            .filter(|p| p.course_id.as_str() == format!("course-{course_idx}"))
            .collect::<Vec<_>>();

        for problem in course_problems {
            let required: Vec<usize> = problem
                .required_skills
                .iter()
                .filter(|t| t.category() == SkillCategory::Concept)
                .map(|t| SkillTag::ALL.iter().position(|x| *x == t).expect("taxonomy tag"))
                .collect();
            let deficit = |mastery: &[f64]| -> f64 {
                if required.is_empty() {
                    0.5
                } else {
                    required.iter().map(|&i| 1.0 - mastery[i]).sum::<f64>() / required.len() as f64
                }
            };

            // Outcome: mastery-driven at q=0, trait-driven at q=1.
            let d0 = deficit(&mastery);
            let logit = 0.25
                + 2.2 * (1.0 - q_strength) * (0.5 - d0) * 2.0
                + 2.2 * q_strength * trait_sign;
            let succeeded = rng.random_bool(sigmoid(logit).clamp(0.02, 0.98));

            // Attempt count is independent of both trait and outcome, so row
            // counts carry no label signal.
            let n_attempts = rng.random_range(1..=config.max_attempts);
            let success_at = if succeeded {
                Some(rng.random_range(1..=n_attempts.min(2)))
            } else {
                None
            };

            // Pre-submission question, occasionally.
            if rng.random_bool(0.05) {
                let q = make_question(
                    &mut rng,
                    &student,
                    problem,
                    &mastery,
                    &required,
                    trait_sign,
                    0,
                    now,
                );
                builder.push_question(q);
            }
            now += 1;

            for attempt in 1..=n_attempts {
                let d = deficit(&mastery);
                // Score is a logistic function of the mastery deficit, capped
                // below 100 unless this is the planted success attempt.
                let raw = 100.0 * sigmoid(1.4 * (0.5 - d) + rng.random_range(-0.35..0.35));
                let mut score = (raw.round() as u32).clamp(5, 95);
                if success_at == Some(attempt) {
                    score = 100;
                }
                let code_text = format!("step = {attempt}\n{}", problem.reference_solution_code);
                builder.push_submission(SubmissionRecord {
                    student_id: student.clone(),
                    problem_id: problem.problem_id.clone(),
                    attempt_index: attempt,
                    code_text,
                    score,
                    timestamp: now,
                });
                now += 1;

                // Question probability tied to the current deficit.
                let p_question = (0.15 + 0.7 * d).clamp(0.0, 0.9);
                if rng.random_bool(p_question) {
                    let q = make_question(
                        &mut rng,
                        &student,
                        problem,
                        &mastery,
                        &required,
                        trait_sign,
                        attempt,
                        now,
                    );
                    builder.push_question(q);
                    now += 1;
                }

                for &i in &required {
                    mastery[i] += config.mastery_learning_rate * (1.0 - mastery[i]);
                }
            }
            now += 1;
        }
    }

    builder.build()
}

#[allow(clippy::too_many_arguments)]
fn make_question(
    rng: &mut ChaCha8Rng,
    student: &StudentId,
    problem: &ProblemSpec,
    mastery: &[f64],
    required: &[usize],
    trait_sign: f64,
    after_attempt_index: u32,
    timestamp: u64,
) -> QuestionRecord {
    // Weakest required skill, ties broken by taxonomy order.
    let weakest = required
        .iter()
        .copied()
        .min_by(|&a, &b| mastery[a].partial_cmp(&mastery[b]).expect("finite mastery"))
        .unwrap_or(0);
    let tag = SkillTag::ALL[weakest];
    let use_korean = rng.random_bool(0.2);
    let phrase: String = if use_korean {
        korean_phrase(tag)
            .unwrap_or_else(|| mention_phrase(tag))
            .to_string()
    } else {
        mention_phrase(tag).to_string()
    };
    let opener = match rng.random_range(0..3) {
        0 => "Hello, ",
        1 => "안녕하세요, ",
        _ => "",
    };

    // The hidden trait picks the template family; nothing else reveals it.
    let question_text = if trait_sign < 0.0 {
        let (err, msg) = STRUGGLE_ERRORS[rng.random_range(0..STRUGGLE_ERRORS.len())];
        let line_no = rng.random_range(2..9);
        format!(
            "{opener}my code for task {} keeps failing.\nTraceback (most recent call last):\n  File \"main.py\", line {line_no}, in <module>\n{err}: {msg}\nI think the {phrase} part is wrong.",
            problem.ordinal
        )
    } else {
        let extra = match rng.random_range(0..3) {
            0 => "I compared two approaches and want to confirm.",
            1 => "지금 방식이 맞는지 궁금해요.",
            _ => "Just double-checking the steps before I move on.",
        };
        format!(
            "{opener}quick check about the {phrase} part of task {}: is my approach reasonable? {extra}",
            problem.ordinal
        )
    };

    let educator_response_text = if rng.random_bool(0.1) {
        String::new()
    } else {
        format!(
            "Review {}. Pay attention to how the {} behaves here.",
            tag.canonical_name(),
            mention_phrase(tag)
        )
    };

    QuestionRecord {
        student_id: student.clone(),
        problem_id: problem.problem_id.clone(),
        question_text,
        educator_response_text,
        after_attempt_index,
        timestamp,
    }
}

#[cfg(test)]
mod tests {
    use super::super::save_corpus_to_string;
    use super::*;

    #[test]
    fn zero_students_gives_empty_corpus() {
        let cfg = GenConfig {
            n_students: 0,
            ..GenConfig::default()
        };
        let corpus = generate_synthetic_corpus(&cfg, 1).unwrap();
        assert_eq!(corpus.n_students(), 0);
        assert_eq!(corpus.n_problems(), 0);
    }

    #[test]
    fn generation_is_byte_deterministic() {
        let cfg = GenConfig {
            n_students: 12,
            n_problems: 4,
            ..GenConfig::default()
        };
        let a = generate_synthetic_corpus(&cfg, 99).unwrap();
        let b = generate_synthetic_corpus(&cfg, 99).unwrap();
        assert_eq!(save_corpus_to_string(&a), save_corpus_to_string(&b));
        let c = generate_synthetic_corpus(&cfg, 100).unwrap();
        assert_ne!(save_corpus_to_string(&a), save_corpus_to_string(&c));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = GenConfig {
            skills_per_problem_min: 0,
            ..GenConfig::default()
        };
        assert!(matches!(
            generate_synthetic_corpus(&cfg, 1),
            Err(CorpusError::InvalidGenConfig(_))
        ));
        let cfg = GenConfig {
            question_signal_strength: 1.5,
            ..GenConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn generated_corpus_passes_builder_invariants() {
        let cfg = GenConfig {
            n_students: 20,
            n_problems: 5,
            n_courses: 2,
            ..GenConfig::default()
        };
        let corpus = generate_synthetic_corpus(&cfg, 5).unwrap();
        assert_eq!(corpus.n_students(), 20);
        assert_eq!(corpus.n_problems(), 10);
        assert_eq!(corpus.courses().len(), 2);
        // attempt groups are chronological and nonempty
        for (_, groups) in corpus.students() {
            assert!(!groups.is_empty());
            let mut last_ts = 0;
            for g in groups {
                assert!(!g.submissions.is_empty());
                let first = g.submissions.first().unwrap().timestamp;
                assert!(first >= last_ts);
                last_ts = first;
            }
        }
    }

    #[test]
    fn config_parses_from_flat_toml() {
        let cfg = GenConfig::from_toml_str(
            "n_students = 7\nn_problems = 3\nquestion_signal_strength = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.n_students, 7);
        assert_eq!(cfg.question_signal_strength, 1.0);
        assert!(GenConfig::from_toml_str("nonsense_key = 3").is_err());
    }
}
