//! Student-disjoint dataset splits. Students are split within their course
//! so no student's history can leak across train/val/test.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, StudentId};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: BTreeSet<StudentId>,
    pub val: BTreeSet<StudentId>,
    pub test: BTreeSet<StudentId>,
    #[serde(default = "default_ratios")]
    pub ratios: (u32, u32, u32),
}

fn default_ratios() -> (u32, u32, u32) {
    (8, 1, 1)
}

impl DatasetSplit {
    pub fn is_disjoint(&self) -> bool {
        self.train.intersection(&self.val).next().is_none()
            && self.train.intersection(&self.test).next().is_none()
            && self.val.intersection(&self.test).next().is_none()
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}

fn round_half_up(numer: u64, denom: u64) -> u64 {
    (2 * numer + denom) / (2 * denom)
}

fn mix_seed(seed: u64, salt: &str) -> u64 {
    // FNV-1a over the salt, folded into the seed.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in salt.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    seed ^ h
}

/// Deterministic student-disjoint split per course. Each course's students
/// are shuffled with a course-salted stream and cut by the ratios, with a
/// minimum of one student per part.
pub fn split_by_student(
    corpus: &Corpus,
    ratios: (u32, u32, u32),
    seed: u64,
) -> Result<DatasetSplit, CorpusError> {
    let mut split = DatasetSplit {
        ratios,
        ..Default::default()
    };
    let courses = corpus.courses();
    let total_ratio = (ratios.0 + ratios.1 + ratios.2) as u64;
    assert!(total_ratio > 0, "ratios must not all be zero");

    for course in &courses {
        let mut students: Vec<StudentId> = corpus
            .students()
            .filter(|(id, _)| corpus.course_of_student(id) == Some(course))
            .map(|(id, _)| id.clone())
            .collect();
        students.sort();
        let n = students.len();
        let parts = [ratios.0, ratios.1, ratios.2]
            .iter()
            .filter(|&&r| r > 0)
            .count();
        if n < parts {
            return Err(CorpusError::TooFewStudents { have: n, need: parts });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, course.as_str()));
        students.shuffle(&mut rng);

        // Minimum one student per nonzero part.
        let share = |ratio: u32| -> usize {
            if ratio == 0 {
                0
            } else {
                (round_half_up(n as u64 * ratio as u64, total_ratio) as usize).max(1)
            }
        };
        let n_val = share(ratios.1);
        let n_test = share(ratios.2);
        let n_train = n - n_val - n_test;
        let (train_part, rest) = students.split_at(n_train);
        let (val_part, test_part) = rest.split_at(n_val);
        split.train.extend(train_part.iter().cloned());
        split.val.extend(val_part.iter().cloned());
        split.test.extend(test_part.iter().cloned());
    }
    Ok(split)
}

pub fn save_splits(split: &DatasetSplit, path: &Path) -> Result<(), CorpusError> {
    let json = serde_json::to_string_pretty(split).expect("split serializes");
    fs::write(path, json)?;
    Ok(())
}

pub fn load_splits(path: &Path) -> Result<DatasetSplit, CorpusError> {
    let content = fs::read_to_string(path)?;
    serde_json::from_str(&content).map_err(|e| CorpusError::Parse {
        line: 0,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::synth::{generate_synthetic_corpus, GenConfig};
    use super::*;

    fn corpus_with_students(n: usize) -> Corpus {
        let cfg = GenConfig {
            n_students: n,
            n_problems: 3,
            ..GenConfig::default()
        };
        generate_synthetic_corpus(&cfg, 7).unwrap()
    }

    #[test]
    fn split_160_students_gives_128_16_16() {
        let corpus = corpus_with_students(160);
        let split = split_by_student(&corpus, (8, 1, 1), 3).unwrap();
        assert_eq!(split.train.len(), 128);
        assert_eq!(split.val.len(), 16);
        assert_eq!(split.test.len(), 16);
        assert!(split.is_disjoint());
        assert_eq!(split.total(), 160);
    }

    #[test]
    fn split_three_students_gives_one_each() {
        let corpus = corpus_with_students(3);
        let split = split_by_student(&corpus, (8, 1, 1), 3).unwrap();
        assert_eq!(
            (split.train.len(), split.val.len(), split.test.len()),
            (1, 1, 1)
        );
    }

    #[test]
    fn split_rejects_fewer_than_three() {
        let corpus = corpus_with_students(2);
        assert!(matches!(
            split_by_student(&corpus, (8, 1, 1), 3),
            Err(CorpusError::TooFewStudents { .. })
        ));
    }

    #[test]
    fn split_is_deterministic_in_seed() {
        let corpus = corpus_with_students(37);
        let a = split_by_student(&corpus, (8, 1, 1), 11).unwrap();
        let b = split_by_student(&corpus, (8, 1, 1), 11).unwrap();
        assert_eq!(a, b);
        let c = split_by_student(&corpus, (8, 1, 1), 12).unwrap();
        assert_ne!(a, c);
    }
}
