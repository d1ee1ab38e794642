//! Corpus file format: UTF-8 JSONL, one record per line, tagged by `kind`.
//! Required skills are derived, so problem lines never carry them; loading
//! recomputes them from the reference solution.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::skills::Extractor;

use super::{
    Corpus, CorpusBuilder, CorpusError, CourseId, ProblemId, ProblemSpec, QuestionRecord,
    StudentId, SubmissionRecord,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RecordLine {
    Problem {
        problem_id: ProblemId,
        course_id: CourseId,
        ordinal: u32,
        description_text: String,
        reference_solution_code: String,
    },
    Submission {
        student_id: StudentId,
        problem_id: ProblemId,
        attempt_index: u32,
        code_text: String,
        score: u32,
        timestamp: u64,
    },
    Question {
        student_id: StudentId,
        problem_id: ProblemId,
        question_text: String,
        educator_response_text: String,
        after_attempt_index: u32,
        timestamp: u64,
    },
}

pub fn load_corpus_from_str(content: &str, extractor: &Extractor) -> Result<Corpus, CorpusError> {
    let mut builder = CorpusBuilder::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RecordLine =
            serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        match record {
            RecordLine::Problem {
                problem_id,
                course_id,
                ordinal,
                description_text,
                reference_solution_code,
            } => builder.push_problem(ProblemSpec::new(
                problem_id,
                course_id,
                ordinal,
                description_text,
                reference_solution_code,
                extractor,
            )?),
            RecordLine::Submission {
                student_id,
                problem_id,
                attempt_index,
                code_text,
                score,
                timestamp,
            } => builder.push_submission(SubmissionRecord {
                student_id,
                problem_id,
                attempt_index,
                code_text,
                score,
                timestamp,
            }),
            RecordLine::Question {
                student_id,
                problem_id,
                question_text,
                educator_response_text,
                after_attempt_index,
                timestamp,
            } => builder.push_question(QuestionRecord {
                student_id,
                problem_id,
                question_text,
                educator_response_text,
                after_attempt_index,
                timestamp,
            }),
        }
    }
    builder.build()
}

pub fn load_corpus(path: &Path, extractor: &Extractor) -> Result<Corpus, CorpusError> {
    let content = fs::read_to_string(path)?;
    load_corpus_from_str(&content, extractor)
}

/// Serializes deterministically: problems sorted by (course, ordinal), then
/// per student (sorted by id) all submissions and questions in group order.
pub fn save_corpus_to_string(corpus: &Corpus) -> String {
    let mut out = String::new();
    let mut problems: Vec<&ProblemSpec> = corpus.problems().collect();
    problems.sort_by(|a, b| {
        (&a.course_id, a.ordinal).cmp(&(&b.course_id, b.ordinal))
    });
    for p in problems {
        let line = serde_json::to_string(&RecordLine::Problem {
            problem_id: p.problem_id.clone(),
            course_id: p.course_id.clone(),
            ordinal: p.ordinal,
            description_text: p.description_text.clone(),
            reference_solution_code: p.reference_solution_code.clone(),
        })
        .expect("record serializes");
        out.push_str(&line);
        out.push('\n');
    }
    let mut student_ids: Vec<&StudentId> = corpus.student_ids().collect();
    student_ids.sort();
    for sid in student_ids {
        let groups = corpus.student_groups(sid).expect("listed student exists");
        for g in groups {
            for s in &g.submissions {
                let line = serde_json::to_string(&RecordLine::Submission {
                    student_id: s.student_id.clone(),
                    problem_id: s.problem_id.clone(),
                    attempt_index: s.attempt_index,
                    code_text: s.code_text.clone(),
                    score: s.score,
                    timestamp: s.timestamp,
                })
                .expect("record serializes");
                out.push_str(&line);
                out.push('\n');
            }
            for q in &g.questions {
                let line = serde_json::to_string(&RecordLine::Question {
                    student_id: q.student_id.clone(),
                    problem_id: q.problem_id.clone(),
                    question_text: q.question_text.clone(),
                    educator_response_text: q.educator_response_text.clone(),
                    after_attempt_index: q.after_attempt_index,
                    timestamp: q.timestamp,
                })
                .expect("record serializes");
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    out
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    fs::write(path, save_corpus_to_string(corpus))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::tests::tiny_corpus;
    use super::*;

    #[test]
    fn empty_file_is_empty_corpus() {
        let corpus = load_corpus_from_str("", Extractor::bundled()).unwrap();
        assert_eq!(corpus.n_problems(), 0);
        assert_eq!(corpus.n_students(), 0);
        assert!(corpus.courses().is_empty());
    }

    #[test]
    fn round_trip_preserves_corpus() {
        let corpus = tiny_corpus();
        let text = save_corpus_to_string(&corpus);
        let back = load_corpus_from_str(&text, Extractor::bundled()).unwrap();
        assert_eq!(back, corpus);
        // and serialization is deterministic
        assert_eq!(save_corpus_to_string(&back), text);
    }

    #[test]
    fn parse_error_reports_line_number() {
        let text = "{\"kind\":\"problem\",\"problem_id\":\"p\",\"course_id\":\"c\",\"ordinal\":0,\"description_text\":\"d\",\"reference_solution_code\":\"print(1)\"}\nnot json\n";
        let err = load_corpus_from_str(text, Extractor::bundled()).unwrap_err();
        match err {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn required_skills_recomputed_on_load() {
        let corpus = tiny_corpus();
        let text = save_corpus_to_string(&corpus);
        let back = load_corpus_from_str(&text, Extractor::bundled()).unwrap();
        for p in back.problems() {
            let expected = Extractor::bundled()
                .required_skills_for_problem(&p.reference_solution_code)
                .unwrap();
            assert_eq!(p.required_skills, expected);
        }
    }
}
