//! Extraction and review metrics: character error rate, flagged-note
//! accuracy, R0–R3 tallies and the usable fraction (%R01).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{NoteType, ReviewLabel, ReviewRecord, ReviewSummary};
use crate::scalar::{from_count, Real, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("reference text is empty")]
    EmptyReference,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("length mismatch: {left} ground-truth labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },
    #[error("no review records")]
    EmptyRecords,
}

/// Levenshtein distance over Unicode scalar values with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the reference length in characters.
pub fn cer<T: Real>(reference: &str, hypothesis: &str) -> Result<T, EvalError> {
    let n = reference.chars().count();
    if n == 0 {
        return Err(EvalError::EmptyReference);
    }
    Ok(from_count::<T>(edit_distance(reference, hypothesis)) / from_count::<T>(n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CerSample<T> {
    pub reference: String,
    pub hypothesis: String,
    pub cer: T,
}

impl<T: Real> CerSample<T> {
    pub fn new(reference: impl Into<String>, hypothesis: impl Into<String>) -> Result<Self, EvalError> {
        let reference = reference.into();
        let hypothesis = hypothesis.into();
        let cer = cer(&reference, &hypothesis)?;
        Ok(Self {
            reference,
            hypothesis,
            cer,
        })
    }
}

/// Divisor used for the standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdKind {
    /// n − 1
    #[default]
    Sample,
    /// n
    Population,
}

/// Arithmetic mean and standard deviation.
pub fn mean_std<T: Real>(values: &[T], kind: StdKind) -> Result<(T, T), EvalError> {
    let needed = match kind {
        StdKind::Sample => 2,
        StdKind::Population => 1,
    };
    if values.len() < needed {
        return Err(EvalError::InsufficientSamples {
            needed,
            got: values.len(),
        });
    }
    let n = from_count::<T>(values.len());
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / n;
    let ss = values
        .iter()
        .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
    let denom = match kind {
        StdKind::Sample => n - T::one(),
        StdKind::Population => n,
    };
    Ok((mean, (ss / denom).sqrt()))
}

pub fn aggregate_cer<T: Real>(samples: &[CerSample<T>], kind: StdKind) -> Result<(T, T), EvalError> {
    let values: Vec<T> = samples.iter().map(|s| s.cer).collect();
    mean_std(&values, kind)
}

/// Fraction of notes whose predicted flagged/plain type matches the truth.
pub fn flagged_accuracy<T: Scalar>(ground_truth: &[NoteType], predicted: &[NoteType]) -> Result<T, EvalError> {
    if ground_truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            left: ground_truth.len(),
            right: predicted.len(),
        });
    }
    if ground_truth.is_empty() {
        return Err(EvalError::InsufficientSamples { needed: 1, got: 0 });
    }
    let hits = ground_truth
        .iter()
        .zip(predicted)
        .filter(|(a, b)| a == b)
        .count();
    Ok(from_count::<T>(hits) / from_count::<T>(ground_truth.len()))
}

/// Fraction of records carrying only R0/R1 labels.
pub fn pr01<T: Scalar>(records: &[ReviewRecord]) -> Result<T, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    let usable = records.iter().filter(|r| r.is_usable()).count();
    Ok(from_count::<T>(usable) / from_count::<T>(records.len()))
}

/// Label occurrences across all records; a record labelled {R1, R2} counts
/// once for each. All four labels are always present in the map.
pub fn r_counts(records: &[ReviewRecord]) -> BTreeMap<ReviewLabel, usize> {
    let mut counts: BTreeMap<ReviewLabel, usize> = ReviewLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for label in records.iter().flat_map(|r| r.labels.iter()) {
        *counts.entry(*label).or_default() += 1;
    }
    counts
}

pub fn summarize(records: &[ReviewRecord]) -> ReviewSummary {
    ReviewSummary {
        items: records.len(),
        r_counts: r_counts(records),
        pr01: pr01::<f64>(records).ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{DateTime, Utc};

    fn rec(labels: &[ReviewLabel]) -> ReviewRecord {
        let ts: DateTime<Utc> = "2024-09-01T00:00:00Z".parse().unwrap();
        ReviewRecord::new("x", labels.iter().copied(), None, "sme", ts).unwrap()
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("abc", ""), 3);
        assert_eq!(edit_distance("FOR U21", "FORU21"), 1);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("ü", "u"), 1);
    }

    #[test]
    fn cer_examples() {
        assert_eq!(cer::<f64>("SAME", "SAME").unwrap(), 0.0);
        assert!((cer::<f64>("FOR U21", "FORU21").unwrap() - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(cer::<f64>("", "x"), Err(EvalError::EmptyReference));
    }

    #[test]
    fn aggregate_matches_hand_arithmetic() {
        let (m, s) = mean_std(&[0.0, 0.0, 0.142857_f64], StdKind::Sample).unwrap();
        assert!((m - 0.047619).abs() < 1e-6);
        assert!((s - 0.082479).abs() < 1e-6);
        let (_, pop) = mean_std(&[0.0, 0.0, 0.142857_f64], StdKind::Population).unwrap();
        assert!((pop - 0.067344).abs() < 1e-6);
        assert!(matches!(
            mean_std(&[0.1_f64], StdKind::Sample),
            Err(EvalError::InsufficientSamples { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn aggregate_from_samples() {
        let samples = vec![
            CerSample::<f32>::new("A", "A").unwrap(),
            CerSample::new("FOR U21", "FORU21").unwrap(),
        ];
        let (m, _) = aggregate_cer(&samples, StdKind::Sample).unwrap();
        assert!((m - 1.0 / 14.0).abs() < 1e-6);
    }

    #[test]
    fn flagged_accuracy_examples() {
        use NoteType::*;
        let gt = vec![Plain; 22];
        let mut pred = gt.clone();
        pred[3] = Flagged;
        let acc: f64 = flagged_accuracy(&gt, &pred).unwrap();
        assert!((acc - 21.0 / 22.0).abs() < 1e-12);
        assert_eq!(flagged_accuracy::<f64>(&gt, &gt).unwrap(), 1.0);
        assert!(matches!(
            flagged_accuracy::<f64>(&gt, &pred[..3]),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn pr01_and_counts() {
        use ReviewLabel::*;
        let records = vec![rec(&[R0]), rec(&[R1, R2])];
        assert_eq!(pr01::<f64>(&records).unwrap(), 0.5);
        let c = r_counts(&records);
        assert_eq!(c[&R0], 1);
        assert_eq!(c[&R1], 1);
        assert_eq!(c[&R2], 1);
        assert_eq!(c[&R3], 0);
        assert!(r_counts(&[]).values().all(|&v| v == 0));
        assert_eq!(pr01::<f64>(&[]), Err(EvalError::EmptyRecords));
    }
}
