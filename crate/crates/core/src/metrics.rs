//! Multiclass evaluation: logarithmic loss, accuracy, macro
//! precision/recall, and the confusion matrix.

use thiserror::Error;

/// Predicted probabilities and one-hot truth for a batch of samples.
/// Row `i` of `probs` must sum to 1 (within 1e-9); `truth[i]` is the true
/// class index in `class_order`.
#[derive(Debug, Clone)]
pub struct PredictionMatrix {
    pub sample_ids: Vec<String>,
    pub probs: Vec<Vec<f64>>,
    pub truth: Vec<usize>,
    pub class_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// `confusion[i][j]` counts samples of true class `i` predicted as `j`.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction matrix is empty")]
    Empty,
    #[error("row {row}: probabilities sum to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("row {row}: expected {expected} classes, got {got}")]
    RowWidth { row: usize, expected: usize, got: usize },
    #[error("row {row}: true class {class} out of range")]
    BadTruth { row: usize, class: usize },
    #[error("epsilon must be in (0, 0.5), got {0}")]
    BadEpsilon(f64),
}

/// First index holding the maximum value; ties resolve to the lowest
/// (canonical-order) index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl PredictionMatrix {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.probs.is_empty() {
            return Err(MetricsError::Empty);
        }
        let m = self.class_order.len();
        for (row, p) in self.probs.iter().enumerate() {
            if p.len() != m {
                return Err(MetricsError::RowWidth { row, expected: m, got: p.len() });
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(MetricsError::RowSum { row, sum });
            }
        }
        for (row, &t) in self.truth.iter().enumerate() {
            if t >= m {
                return Err(MetricsError::BadTruth { row, class: t });
            }
        }
        Ok(())
    }
}

/// Mean negative natural log-probability of the true class, with
/// probabilities clipped to `[epsilon, 1 - epsilon]` and rows renormalized
/// after clipping.
pub fn logloss(pm: &PredictionMatrix, epsilon: f64) -> Result<f64, MetricsError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(MetricsError::BadEpsilon(epsilon));
    }
    pm.validate()?;
    let n = pm.probs.len() as f64;
    let mut total = 0.0;
    for (p, &t) in pm.probs.iter().zip(&pm.truth) {
        let clipped: Vec<f64> = p.iter().map(|&x| x.clamp(epsilon, 1.0 - epsilon)).collect();
        let sum: f64 = clipped.iter().sum();
        total -= (clipped[t] / sum).ln();
    }
    Ok(total / n)
}

/// Argmax-based accuracy, macro-averaged precision/recall, and the
/// confusion matrix. Per-class precision with an empty predicted column
/// is defined as 0, likewise recall for an absent class.
pub fn classification_report(pm: &PredictionMatrix) -> Result<ClassificationReport, MetricsError> {
    pm.validate()?;
    let m = pm.class_order.len();
    let mut confusion = vec![vec![0usize; m]; m];
    for (p, &t) in pm.probs.iter().zip(&pm.truth) {
        confusion[t][argmax(p)] += 1;
    }
    let n: usize = pm.probs.len();
    let correct: usize = (0..m).map(|i| confusion[i][i]).sum();

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    for c in 0..m {
        let predicted: usize = (0..m).map(|i| confusion[i][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        precision_sum += if predicted == 0 {
            0.0
        } else {
            confusion[c][c] as f64 / predicted as f64
        };
        recall_sum += if actual == 0 {
            0.0
        } else {
            confusion[c][c] as f64 / actual as f64
        };
    }
    Ok(ClassificationReport {
        accuracy: correct as f64 / n as f64,
        macro_precision: precision_sum / m as f64,
        macro_recall: recall_sum / m as f64,
        confusion,
    })
}
