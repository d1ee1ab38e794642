//! Fidelity of the bundled extractor against the hand-labeled gold corpus
//! and the six reference interaction examples.

use sqkt_core::skills::{
    evaluate_extractor, load_gold_annotations, Extractor, SkillSet, SkillTag,
    BUNDLED_GOLD_JSONL,
};

#[test]
fn gold_corpus_has_100_items() {
    let gold = load_gold_annotations(BUNDLED_GOLD_JSONL).unwrap();
    assert_eq!(gold.len(), 100);
}

#[test]
fn extractor_scores_at_least_080_on_gold() {
    let extractor = Extractor::bundled();
    let gold = load_gold_annotations(BUNDLED_GOLD_JSONL).unwrap();
    let start = std::time::Instant::now();
    let score = evaluate_extractor(extractor, &gold);
    let elapsed = start.elapsed();

    // Per-item diagnostics on failure.
    if score.precision < 0.80 || score.recall < 0.80 || score.f1 < 0.80 {
        for (i, ann) in gold.iter().enumerate() {
            let got = extractor.extract_from_question(&ann.question_text);
            if got != ann.gold_skills {
                let missing: Vec<_> = ann
                    .gold_skills
                    .iter()
                    .filter(|t| !got.contains(*t))
                    .map(|t| t.canonical_name())
                    .collect();
                let extra: Vec<_> = got
                    .iter()
                    .filter(|t| !ann.gold_skills.contains(*t))
                    .map(|t| t.canonical_name())
                    .collect();
                eprintln!(
                    "item {}: missing={missing:?} extra={extra:?} q={:?}",
                    i + 1,
                    ann.question_text.lines().next().unwrap_or("")
                );
            }
        }
    }
    eprintln!(
        "gold micro scores: precision={:.3} recall={:.3} f1={:.3} (tp={} fp={} fn={}) in {:?}",
        score.precision,
        score.recall,
        score.f1,
        score.true_positives,
        score.false_positives,
        score.false_negatives,
        elapsed
    );
    assert!(score.precision >= 0.80, "precision {}", score.precision);
    assert!(score.recall >= 0.80, "recall {}", score.recall);
    assert!(score.f1 >= 0.80, "f1 {}", score.f1);
    assert!(elapsed.as_secs() < 10, "gold evaluation too slow: {elapsed:?}");
}

fn superset_case(question_text: &str, expected: &[SkillTag]) {
    let got = Extractor::bundled().extract_from_question(question_text);
    let want: SkillSet = expected.iter().copied().collect();
    assert!(
        got.is_superset(&want),
        "expected {got} to cover {want} for {question_text:?}"
    );
}

/// The six reference interactions: extraction must cover each published
/// skill row.
#[test]
fn six_reference_examples_are_covered() {
    // 1: summation loop, question embeds the student's code
    superset_case(
        "Why does the summation variable not produce the correct summation when printed in the given code?\nsummation = 0\nwhile num > 0:\n    summation = summation + 1\n    num = num - 1\nprint(summation)",
        &[SkillTag::WhileLoops, SkillTag::PrintFunction, SkillTag::Operators],
    );
    // 2: string insertion via slicing
    superset_case(
        "Can't it be done using only parentheses?\nIs it better to use square brackets for distinction? Square brackets are used for index slicing.\nAlso, how can I insert a string into the middle of another string?\nst_len1 = sentence[x:]\nst_len2 = sentence[:x]\nadd_st = str(input())\nsentence = st_len1 + add_st + st_len2",
        &[SkillTag::Strings, SkillTag::Operators, SkillTag::Indexing],
    );
    // 3: echo program, code-based question
    superset_case(
        "var = input('')\nprint('Parrot:', var)\nWhat should I enter in the input('') function?",
        &[
            SkillTag::VariableAssign,
            SkillTag::Operands,
            SkillTag::InputFunction,
            SkillTag::PrintFunction,
        ],
    );
    // 4: pure traceback question
    superset_case(
        "Traceback (most recent call last):\n  File \"main.py\", line 8, in <module>\n    print[17, James Bond]\nNameError: name 'James Bond' is not defined",
        &[SkillTag::Value, SkillTag::NameError],
    );
    // 5: password comparison, prose with inline assignments
    superset_case(
        "If I input '12345' in the terminal, it shows incorrect. But if I input 12345, it shows correct. Why is that? Can't I set answer = 12345 instead? If answer = '12345', do I need to type 12345 in the terminal for it to match?",
        &[SkillTag::InputFunction, SkillTag::VariableAssign],
    );
    // 6: truthiness check in a conditional
    superset_case(
        "In this part, doesn't `if result:` mean the same as `if result = True`?\nWhy does it cause an error when I write `if result = True`?",
        &[SkillTag::IfElseStatements, SkillTag::BooleanValues],
    );
}
