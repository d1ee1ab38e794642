//! Classification metrics: rank-based AUC (Mann-Whitney with half-credit
//! ties), thresholded accuracy, and F1 with explicit zero-denominator
//! flagging.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty prediction set")]
    EmptyInput,
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(), MetricError> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(MetricError::EmptyInput);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore(i));
    }
    Ok(())
}

/// Mann-Whitney AUC via tied ranks: the fraction of (positive, negative)
/// pairs ranked correctly, ties counting one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    check_inputs(scores, labels)?;
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::UndefinedMetric(
            "AUC needs at least one positive and one negative label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // average ranks over tie groups, 1-based
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Fraction of thresholded predictions matching the labels.
pub fn accuracy(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64, MetricError> {
    check_inputs(scores, labels)?;
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s >= threshold) == l)
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

/// F1 with its zero-denominator flag; the positive class is success.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Result {
    pub value: f64,
    pub zero_denominator: bool,
}

pub fn f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<F1Result, MetricError> {
    check_inputs(scores, labels)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&s, &l) in scores.iter().zip(labels) {
        let p = s >= threshold;
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    // tp == 0 makes precision + recall zero, so the harmonic mean has a
    // zero denominator in every early-return case.
    if tp == 0 {
        return Ok(F1Result {
            value: 0.0,
            zero_denominator: true,
        });
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(F1Result {
        value: 2.0 * precision * recall / (precision + recall),
        zero_denominator: false,
    })
}

/// Median over a nonempty slice; even lengths average the middle pair.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
