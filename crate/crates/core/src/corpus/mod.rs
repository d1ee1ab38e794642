//! Corpus data model: courses, problems, per-student submission and question
//! streams, outcome labeling, student-disjoint splits, and labeled-instance
//! construction. Corpora are immutable once built and safe to share across
//! threads.

mod jsonl;
mod split;
mod synth;

pub use jsonl::{load_corpus, load_corpus_from_str, save_corpus, save_corpus_to_string};
pub use split::{load_splits, save_splits, split_by_student, DatasetSplit};
pub use synth::{generate_synthetic_corpus, GenConfig};

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skills::{Extractor, SkillError, SkillSet};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate problem id {0:?}")]
    DuplicateProblem(ProblemId),
    #[error("duplicate ordinal {ordinal} in course {course:?}")]
    DuplicateOrdinal { course: CourseId, ordinal: u32 },
    #[error("record references unknown problem {problem:?}")]
    UnknownProblem { problem: ProblemId },
    #[error("question from {student:?} on {problem:?} has no submissions to attach to")]
    QuestionWithoutSubmissions { student: StudentId, problem: ProblemId },
    #[error("attempt indices for {student:?} on {problem:?} are not 1..n without gaps")]
    NonContiguousAttempts { student: StudentId, problem: ProblemId },
    #[error("score {score} outside [0,100]")]
    ScoreOutOfRange { score: i64 },
    #[error("question text is empty for {student:?} on {problem:?}")]
    EmptyQuestionText { student: StudentId, problem: ProblemId },
    #[error("course {0:?} has no (student, problem) pairs with submissions")]
    EmptyCourse(CourseId),
    #[error("need at least {need} students to split, found {have}")]
    TooFewStudents { have: usize, need: usize },
    #[error("invalid generator config: {0}")]
    InvalidGenConfig(String),
    #[error(transparent)]
    Skill(#[from] SkillError),
}

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_newtype!(
    /// Opaque student identifier.
    StudentId
);
id_newtype!(
    /// Opaque problem identifier, unique within a corpus.
    ProblemId
);
id_newtype!(
    /// Opaque course identifier.
    CourseId
);

/// A problem with its derived required skills. `required_skills` always
/// equals the extractor output over the reference solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub problem_id: ProblemId,
    pub course_id: CourseId,
    pub ordinal: u32,
    pub description_text: String,
    pub reference_solution_code: String,
    pub required_skills: SkillSet,
}

impl ProblemSpec {
    pub fn new(
        problem_id: ProblemId,
        course_id: CourseId,
        ordinal: u32,
        description_text: String,
        reference_solution_code: String,
        extractor: &Extractor,
    ) -> Result<Self, CorpusError> {
        let required_skills = extractor.required_skills_for_problem(&reference_solution_code)?;
        Ok(Self {
            problem_id,
            course_id,
            ordinal,
            description_text,
            reference_solution_code,
            required_skills,
        })
    }

    /// Replaces the reference solution and recomputes required skills.
    pub fn set_reference_solution(
        &mut self,
        code: String,
        extractor: &Extractor,
    ) -> Result<(), CorpusError> {
        self.required_skills = extractor.required_skills_for_problem(&code)?;
        self.reference_solution_code = code;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub student_id: StudentId,
    pub problem_id: ProblemId,
    /// 1-based, strictly increasing without gaps per (student, problem).
    pub attempt_index: u32,
    pub code_text: String,
    /// Integer score in [0, 100]; 100 means the graders accepted it.
    pub score: u32,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub student_id: StudentId,
    pub problem_id: ProblemId,
    pub question_text: String,
    /// May be empty; empty responses are excluded from the response loss.
    pub educator_response_text: String,
    /// 0 means the question was asked before any submission.
    pub after_attempt_index: u32,
    pub timestamp: u64,
}

/// Everything one student did on one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptGroup {
    pub problem_id: ProblemId,
    pub submissions: Vec<SubmissionRecord>,
    pub questions: Vec<QuestionRecord>,
}

/// Binary outcome on a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Failure,
    Success,
}

impl Outcome {
    pub fn as_f64(self) -> f64 {
        match self {
            Outcome::Failure => 0.0,
            Outcome::Success => 1.0,
        }
    }

    pub fn is_success(self) -> bool {
        matches!(self, Outcome::Success)
    }
}

/// One prediction instance: full prior history plus the labeled target.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub student_id: StudentId,
    pub target_problem_id: ProblemId,
    pub history: Vec<AttemptGroup>,
    pub label: Outcome,
}

/// Per-course success thresholds (mean submissions per student-problem pair).
pub type ThresholdMap = BTreeMap<CourseId, u32>;

/// An immutable corpus. Problems keep file order; per-student attempt groups
/// are chronological by first submission, ties broken by problem ordinal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    problems: IndexMap<ProblemId, ProblemSpec>,
    students: IndexMap<StudentId, Vec<AttemptGroup>>,
}

impl Corpus {
    pub fn problems(&self) -> impl Iterator<Item = &ProblemSpec> {
        self.problems.values()
    }

    pub fn problem(&self, id: &ProblemId) -> Option<&ProblemSpec> {
        self.problems.get(id)
    }

    pub fn n_problems(&self) -> usize {
        self.problems.len()
    }

    pub fn n_students(&self) -> usize {
        self.students.len()
    }

    pub fn student_ids(&self) -> impl Iterator<Item = &StudentId> {
        self.students.keys()
    }

    pub fn student_groups(&self, id: &StudentId) -> Option<&[AttemptGroup]> {
        self.students.get(id).map(|v| v.as_slice())
    }

    pub fn students(&self) -> impl Iterator<Item = (&StudentId, &[AttemptGroup])> {
        self.students.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn courses(&self) -> BTreeSet<CourseId> {
        self.problems.values().map(|p| p.course_id.clone()).collect()
    }

    /// The course a student belongs to: the course of their first attempted
    /// problem.
    pub fn course_of_student(&self, id: &StudentId) -> Option<&CourseId> {
        let groups = self.students.get(id)?;
        let first = groups.first()?;
        self.problems.get(&first.problem_id).map(|p| &p.course_id)
    }

    /// A corpus containing only the given students (all problems retained).
    pub fn restricted_to_students(&self, keep: &BTreeSet<StudentId>) -> Corpus {
        Corpus {
            problems: self.problems.clone(),
            students: self
                .students
                .iter()
                .filter(|(id, _)| keep.contains(*id))
                .map(|(id, g)| (id.clone(), g.clone()))
                .collect(),
        }
    }

    /// A corpus containing only problems (and activity) of the given courses.
    pub fn restricted_to_courses(&self, keep: &BTreeSet<CourseId>) -> Corpus {
        let problems: IndexMap<ProblemId, ProblemSpec> = self
            .problems
            .iter()
            .filter(|(_, p)| keep.contains(&p.course_id))
            .map(|(id, p)| (id.clone(), p.clone()))
            .collect();
        let students: IndexMap<StudentId, Vec<AttemptGroup>> = self
            .students
            .iter()
            .filter_map(|(id, groups)| {
                let kept: Vec<AttemptGroup> = groups
                    .iter()
                    .filter(|g| problems.contains_key(&g.problem_id))
                    .cloned()
                    .collect();
                if kept.is_empty() {
                    None
                } else {
                    Some((id.clone(), kept))
                }
            })
            .collect();
        Corpus { problems, students }
    }
}

/// Assembles and validates a corpus from raw records.
#[derive(Debug, Default)]
pub struct CorpusBuilder {
    problems: Vec<ProblemSpec>,
    submissions: Vec<SubmissionRecord>,
    questions: Vec<QuestionRecord>,
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_problem(&mut self, p: ProblemSpec) {
        self.problems.push(p);
    }

    pub fn push_submission(&mut self, s: SubmissionRecord) {
        self.submissions.push(s);
    }

    pub fn push_question(&mut self, q: QuestionRecord) {
        self.questions.push(q);
    }

    pub fn build(self) -> Result<Corpus, CorpusError> {
        let mut problems: IndexMap<ProblemId, ProblemSpec> = IndexMap::new();
        let mut ordinals: BTreeSet<(CourseId, u32)> = BTreeSet::new();
        for p in self.problems {
            if problems.contains_key(&p.problem_id) {
                return Err(CorpusError::DuplicateProblem(p.problem_id));
            }
            if !ordinals.insert((p.course_id.clone(), p.ordinal)) {
                return Err(CorpusError::DuplicateOrdinal {
                    course: p.course_id.clone(),
                    ordinal: p.ordinal,
                });
            }
            problems.insert(p.problem_id.clone(), p);
        }

        let mut grouped: BTreeMap<(StudentId, ProblemId), Vec<SubmissionRecord>> = BTreeMap::new();
        for s in self.submissions {
            if !problems.contains_key(&s.problem_id) {
                return Err(CorpusError::UnknownProblem {
                    problem: s.problem_id,
                });
            }
            if s.score > 100 {
                return Err(CorpusError::ScoreOutOfRange {
                    score: s.score as i64,
                });
            }
            grouped
                .entry((s.student_id.clone(), s.problem_id.clone()))
                .or_default()
                .push(s);
        }
        for ((student, problem), subs) in grouped.iter_mut() {
            subs.sort_by_key(|s| s.attempt_index);
            for (i, s) in subs.iter().enumerate() {
                if s.attempt_index != (i + 1) as u32 {
                    return Err(CorpusError::NonContiguousAttempts {
                        student: student.clone(),
                        problem: problem.clone(),
                    });
                }
            }
        }

        let mut questions_by_pair: BTreeMap<(StudentId, ProblemId), Vec<QuestionRecord>> =
            BTreeMap::new();
        for q in self.questions {
            if !problems.contains_key(&q.problem_id) {
                return Err(CorpusError::UnknownProblem {
                    problem: q.problem_id,
                });
            }
            if q.question_text.trim().is_empty() {
                return Err(CorpusError::EmptyQuestionText {
                    student: q.student_id,
                    problem: q.problem_id,
                });
            }
            let key = (q.student_id.clone(), q.problem_id.clone());
            if !grouped.contains_key(&key) {
                return Err(CorpusError::QuestionWithoutSubmissions {
                    student: key.0,
                    problem: key.1,
                });
            }
            questions_by_pair.entry(key).or_default().push(q);
        }
        for qs in questions_by_pair.values_mut() {
            qs.sort_by_key(|q| (q.after_attempt_index, q.timestamp));
        }

        // Chronological attempt groups per student: first-submission
        // timestamp, ties broken by problem ordinal.
        let mut per_student: BTreeMap<StudentId, Vec<AttemptGroup>> = BTreeMap::new();
        for ((student, problem), submissions) in grouped {
            let questions = questions_by_pair
                .remove(&(student.clone(), problem.clone()))
                .unwrap_or_default();
            per_student
                .entry(student)
                .or_default()
                .push(AttemptGroup {
                    problem_id: problem,
                    submissions,
                    questions,
                });
        }
        let mut students: IndexMap<StudentId, Vec<AttemptGroup>> = IndexMap::new();
        for (student, mut groups) in per_student {
            groups.sort_by_key(|g| {
                let first_ts = g.submissions.first().map(|s| s.timestamp).unwrap_or(0);
                let ordinal = problems
                    .get(&g.problem_id)
                    .map(|p| p.ordinal)
                    .unwrap_or(u32::MAX);
                (first_ts, ordinal)
            });
            students.insert(student, groups);
        }

        Ok(Corpus { problems, students })
    }
}

/// Success iff some submission scores 100 at an attempt index within the
/// threshold. Raising the threshold never flips success into failure.
pub fn label_outcome(submissions: &[SubmissionRecord], threshold: u32) -> Outcome {
    let ok = submissions
        .iter()
        .any(|s| s.score == 100 && s.attempt_index <= threshold);
    if ok {
        Outcome::Success
    } else {
        Outcome::Failure
    }
}

/// Mean submissions per (student, problem) pair in the course, rounded half
/// up, never below 1.
pub fn compute_success_threshold(corpus: &Corpus, course: &CourseId) -> Result<u32, CorpusError> {
    let mut total: u64 = 0;
    let mut pairs: u64 = 0;
    for (_, groups) in corpus.students() {
        for g in groups {
            let Some(p) = corpus.problem(&g.problem_id) else {
                continue;
            };
            if &p.course_id == course && !g.submissions.is_empty() {
                total += g.submissions.len() as u64;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(CorpusError::EmptyCourse(course.clone()));
    }
    // round-half-up of total/pairs in exact integer arithmetic
    let threshold = (2 * total + pairs) / (2 * pairs);
    Ok(threshold.max(1) as u32)
}

/// Thresholds for every course in the corpus. When `restrict_students` is
/// given (the training split), statistics come from those students only.
pub fn compute_thresholds(
    corpus: &Corpus,
    restrict_students: Option<&BTreeSet<StudentId>>,
) -> Result<ThresholdMap, CorpusError> {
    let restricted;
    let base = match restrict_students {
        Some(keep) => {
            restricted = corpus.restricted_to_students(keep);
            &restricted
        }
        None => corpus,
    };
    let mut map = ThresholdMap::new();
    for course in corpus.courses() {
        let threshold = compute_success_threshold(base, &course)?;
        map.insert(course, threshold);
    }
    Ok(map)
}

/// One instance per attempted problem except the chronologically first;
/// history is every prior attempt group in order. Students with a single
/// attempted problem yield nothing.
pub fn build_instances(
    corpus: &Corpus,
    students: &BTreeSet<StudentId>,
    thresholds: &ThresholdMap,
) -> Vec<LabeledInstance> {
    let mut out = Vec::new();
    for student in students {
        let Some(groups) = corpus.student_groups(student) else {
            continue;
        };
        for i in 1..groups.len() {
            let target = &groups[i];
            let Some(problem) = corpus.problem(&target.problem_id) else {
                continue;
            };
            let Some(&threshold) = thresholds.get(&problem.course_id) else {
                continue;
            };
            out.push(LabeledInstance {
                student_id: student.clone(),
                target_problem_id: target.problem_id.clone(),
                history: groups[..i].to_vec(),
                label: label_outcome(&target.submissions, threshold),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skills::Extractor;

    pub(crate) fn tiny_corpus() -> Corpus {
        let ex = Extractor::bundled();
        let mut b = CorpusBuilder::new();
        for (i, (pid, code)) in [
            ("pA", "print(20)"),
            ("pB", "x = input()\nprint(x)"),
            ("pC", "for i in range(3):\n    print(i)"),
        ]
        .iter()
        .enumerate()
        {
            b.push_problem(
                ProblemSpec::new(
                    ProblemId::from(*pid),
                    CourseId::from("c0"),
                    i as u32,
                    format!("problem {pid}"),
                    code.to_string(),
                    ex,
                )
                .unwrap(),
            );
        }
        let sub = |student: &str, problem: &str, attempt: u32, score: u32, ts: u64| {
            SubmissionRecord {
                student_id: StudentId::from(student),
                problem_id: ProblemId::from(problem),
                attempt_index: attempt,
                code_text: "print(1)".into(),
                score,
                timestamp: ts,
            }
        };
        b.push_submission(sub("s1", "pA", 1, 60, 10));
        b.push_submission(sub("s1", "pA", 2, 100, 12));
        b.push_submission(sub("s1", "pB", 1, 100, 20));
        b.push_submission(sub("s1", "pC", 1, 40, 30));
        b.push_submission(sub("s1", "pC", 2, 50, 32));
        b.push_submission(sub("s1", "pC", 3, 100, 34));
        b.push_submission(sub("s2", "pA", 1, 100, 11));
        b.push_submission(sub("s2", "pB", 1, 30, 21));
        b.push_question(QuestionRecord {
            student_id: StudentId::from("s1"),
            problem_id: ProblemId::from("pC"),
            question_text: "my for loop is broken".into(),
            educator_response_text: "check the range".into(),
            after_attempt_index: 1,
            timestamp: 31,
        });
        b.build().unwrap()
    }

    #[test]
    fn label_outcome_follows_threshold_rule() {
        let subs = |scores: &[u32]| -> Vec<SubmissionRecord> {
            scores
                .iter()
                .enumerate()
                .map(|(i, &score)| SubmissionRecord {
                    student_id: StudentId::from("s"),
                    problem_id: ProblemId::from("p"),
                    attempt_index: (i + 1) as u32,
                    code_text: String::new(),
                    score,
                    timestamp: i as u64,
                })
                .collect()
        };
        assert_eq!(label_outcome(&subs(&[60, 100]), 3), Outcome::Success);
        assert_eq!(
            label_outcome(&subs(&[80, 90, 95, 100]), 3),
            Outcome::Failure
        );
        assert_eq!(label_outcome(&subs(&[90, 95]), 5), Outcome::Failure);
    }

    #[test]
    fn threshold_rounds_half_up_and_floors_at_one() {
        // counts [2,4,3,3] -> mean 3.0 -> 3
        let corpus = {
            let ex = Extractor::bundled();
            let mut b = CorpusBuilder::new();
            b.push_problem(
                ProblemSpec::new(
                    ProblemId::from("p"),
                    CourseId::from("c"),
                    0,
                    "d".into(),
                    "print(1)".into(),
                    ex,
                )
                .unwrap(),
            );
            for (si, count) in [2u32, 4, 3, 3].iter().enumerate() {
                for a in 1..=*count {
                    b.push_submission(SubmissionRecord {
                        student_id: StudentId::from(format!("s{si}").as_str()),
                        problem_id: ProblemId::from("p"),
                        attempt_index: a,
                        code_text: String::new(),
                        score: 50,
                        timestamp: a as u64,
                    });
                }
            }
            b.build().unwrap()
        };
        assert_eq!(
            compute_success_threshold(&corpus, &CourseId::from("c")).unwrap(),
            3
        );
    }

    #[test]
    fn threshold_single_pair_and_half_case() {
        let make = |counts: &[u32]| {
            let ex = Extractor::bundled();
            let mut b = CorpusBuilder::new();
            b.push_problem(
                ProblemSpec::new(
                    ProblemId::from("p"),
                    CourseId::from("c"),
                    0,
                    "d".into(),
                    "print(1)".into(),
                    ex,
                )
                .unwrap(),
            );
            for (si, count) in counts.iter().enumerate() {
                for a in 1..=*count {
                    b.push_submission(SubmissionRecord {
                        student_id: StudentId::from(format!("s{si}").as_str()),
                        problem_id: ProblemId::from("p"),
                        attempt_index: a,
                        code_text: String::new(),
                        score: 50,
                        timestamp: a as u64,
                    });
                }
            }
            b.build().unwrap()
        };
        assert_eq!(
            compute_success_threshold(&make(&[1]), &CourseId::from("c")).unwrap(),
            1
        );
        // mean 1.5 rounds half-up to 2
        assert_eq!(
            compute_success_threshold(&make(&[1, 2]), &CourseId::from("c")).unwrap(),
            2
        );
        assert!(compute_success_threshold(&make(&[1]), &CourseId::from("zz")).is_err());
    }

    #[test]
    fn instances_skip_first_problem_and_keep_order() {
        let corpus = tiny_corpus();
        let students: BTreeSet<StudentId> = [StudentId::from("s1")].into_iter().collect();
        let thresholds = compute_thresholds(&corpus, None).unwrap();
        let instances = build_instances(&corpus, &students, &thresholds);
        assert_eq!(instances.len(), 2);
        assert_eq!(instances[0].target_problem_id, ProblemId::from("pB"));
        assert_eq!(instances[0].history.len(), 1);
        assert_eq!(instances[1].target_problem_id, ProblemId::from("pC"));
        assert_eq!(instances[1].history.len(), 2);
        for inst in &instances {
            assert!(inst
                .history
                .iter()
                .all(|g| g.problem_id != inst.target_problem_id));
        }
    }

    #[test]
    fn single_problem_student_yields_nothing() {
        let corpus = tiny_corpus();
        // s2 attempted two problems -> 1 instance; restrict to pA only.
        let keep: BTreeSet<CourseId> = [CourseId::from("c0")].into_iter().collect();
        let _ = keep;
        let students: BTreeSet<StudentId> = [StudentId::from("s2")].into_iter().collect();
        let thresholds = compute_thresholds(&corpus, None).unwrap();
        let instances = build_instances(&corpus, &students, &thresholds);
        assert_eq!(instances.len(), 1);
    }

    #[test]
    fn label_is_composed_with_threshold() {
        // s1 on pC reached 100 at attempt 3; threshold from tiny corpus data:
        // counts per pair: [2,1,3,1,1] -> mean 1.6 -> 2, so pC is a failure.
        let corpus = tiny_corpus();
        let thresholds = compute_thresholds(&corpus, None).unwrap();
        assert_eq!(thresholds[&CourseId::from("c0")], 2);
        let students: BTreeSet<StudentId> = [StudentId::from("s1")].into_iter().collect();
        let instances = build_instances(&corpus, &students, &thresholds);
        assert_eq!(instances[1].label, Outcome::Failure);
        assert_eq!(instances[0].label, Outcome::Success);
    }

    #[test]
    fn builder_rejects_bad_records() {
        let ex = Extractor::bundled();
        let problem = ProblemSpec::new(
            ProblemId::from("p1"),
            CourseId::from("c"),
            0,
            "d".into(),
            "print(1)".into(),
            ex,
        )
        .unwrap();

        // question referencing unknown problem names the id
        let mut b = CorpusBuilder::new();
        b.push_problem(problem.clone());
        b.push_question(QuestionRecord {
            student_id: StudentId::from("s"),
            problem_id: ProblemId::from("p9"),
            question_text: "help".into(),
            educator_response_text: String::new(),
            after_attempt_index: 0,
            timestamp: 0,
        });
        let err = b.build().unwrap_err();
        assert!(err.to_string().contains("p9"));

        // duplicate problem ids
        let mut b = CorpusBuilder::new();
        b.push_problem(problem.clone());
        b.push_problem(problem.clone());
        assert!(matches!(b.build(), Err(CorpusError::DuplicateProblem(_))));

        // attempt gap
        let mut b = CorpusBuilder::new();
        b.push_problem(problem.clone());
        b.push_submission(SubmissionRecord {
            student_id: StudentId::from("s"),
            problem_id: ProblemId::from("p1"),
            attempt_index: 2,
            code_text: String::new(),
            score: 10,
            timestamp: 0,
        });
        assert!(matches!(
            b.build(),
            Err(CorpusError::NonContiguousAttempts { .. })
        ));

        // score out of range
        let mut b = CorpusBuilder::new();
        b.push_problem(problem);
        b.push_submission(SubmissionRecord {
            student_id: StudentId::from("s"),
            problem_id: ProblemId::from("p1"),
            attempt_index: 1,
            code_text: String::new(),
            score: 101,
            timestamp: 0,
        });
        assert!(matches!(b.build(), Err(CorpusError::ScoreOutOfRange { .. })));
    }

    #[test]
    fn label_outcome_is_monotone_in_threshold() {
        let subs: Vec<SubmissionRecord> = (1..=4)
            .map(|a| SubmissionRecord {
                student_id: StudentId::from("s"),
                problem_id: ProblemId::from("p"),
                attempt_index: a,
                code_text: String::new(),
                score: if a == 3 { 100 } else { 50 },
                timestamp: a as u64,
            })
            .collect();
        let mut prev = label_outcome(&subs, 1);
        for t in 2..8 {
            let cur = label_outcome(&subs, t);
            assert!(
                !(prev.is_success() && !cur.is_success()),
                "success flipped to failure when threshold rose"
            );
            prev = cur;
        }
    }
}
