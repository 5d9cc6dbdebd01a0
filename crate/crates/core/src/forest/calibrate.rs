//! Probability calibration for the tree ensemble.
//!
//! Raw vote fractions from bagged tree ensembles are often poorly scaled.
//! A per-class sigmoid is fitted on cross-validated vote fractions and
//! the calibrated per-class outputs are renormalized onto the simplex.

use std::fmt::Write as _;

use crate::forest::{train_initial, DataMatrix, ForestConfig, ForestError, TrainedForest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMethod {
    None,
    Sigmoid,
}

impl CalibrationMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(CalibrationMethod::None),
            "sigmoid" => Some(CalibrationMethod::Sigmoid),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CalibrationMethod::None => "none",
            CalibrationMethod::Sigmoid => "sigmoid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub method: CalibrationMethod,
    pub folds: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            method: CalibrationMethod::Sigmoid,
            folds: 3,
        }
    }
}

/// Fitted calibrator. `Sigmoid` holds one `(a, b)` pair per class in
/// canonical class order; a raw score `s` maps to `1 / (1 + exp(a*s + b))`.
#[derive(Debug, Clone, PartialEq)]
pub enum Calibrator {
    None,
    Sigmoid { params: Vec<(f64, f64)> },
}

impl Calibrator {
    /// Map raw per-class vote fractions to calibrated probabilities on
    /// the simplex.
    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        match self {
            Calibrator::None => raw.to_vec(),
            Calibrator::Sigmoid { params } => {
                debug_assert_eq!(params.len(), raw.len());
                let mut out: Vec<f64> = raw
                    .iter()
                    .zip(params)
                    .map(|(&s, &(a, b))| sigmoid(a * s + b))
                    .collect();
                let sum: f64 = out.iter().sum();
                if sum > 0.0 {
                    for v in out.iter_mut() {
                        *v /= sum;
                    }
                } else {
                    let u = 1.0 / out.len() as f64;
                    out.iter_mut().for_each(|v| *v = u);
                }
                out
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            Calibrator::None => {
                let _ = writeln!(out, "method\tnone");
            }
            Calibrator::Sigmoid { params } => {
                let _ = writeln!(out, "method\tsigmoid");
                for (i, (a, b)) in params.iter().enumerate() {
                    let _ = writeln!(out, "{i}\t{a:.16e}\t{b:.16e}");
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header = lines.next().ok_or("empty calibrator file")?;
        match header {
            "method\tnone" => Ok(Calibrator::None),
            "method\tsigmoid" => {
                let mut params = Vec::new();
                for (i, line) in lines.enumerate() {
                    let parts: Vec<&str> = line.split('\t').collect();
                    if parts.len() != 3 {
                        return Err(format!("calibrator line {}: expected 3 fields", i + 2));
                    }
                    let idx: usize = parts[0].parse().map_err(|_| "bad class index")?;
                    if idx != i {
                        return Err(format!("calibrator line {}: out-of-order class", i + 2));
                    }
                    let a: f64 = parts[1].parse().map_err(|_| "bad parameter")?;
                    let b: f64 = parts[2].parse().map_err(|_| "bad parameter")?;
                    params.push((a, b));
                }
                if params.is_empty() {
                    return Err("sigmoid calibrator with no classes".into());
                }
                Ok(Calibrator::Sigmoid { params })
            }
            other => Err(format!("unknown calibrator method line {other:?}")),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Stratified round-robin fold assignment in canonical row order.
fn fold_assignment(
    labels: &[usize],
    n_classes: usize,
    folds: usize,
    class_order: &[String],
) -> Result<Vec<usize>, ForestError> {
    let mut assignment = vec![0usize; labels.len()];
    for class in 0..n_classes {
        let rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == class).collect();
        for (pos, &r) in rows.iter().enumerate() {
            assignment[r] = pos % folds;
        }
        let distinct = rows.len().min(folds);
        if distinct < 2 {
            return Err(ForestError::FoldMissingClass {
                class: class_order[class].clone(),
            });
        }
    }
    Ok(assignment)
}

/// Fit a calibrator on cross-validated raw vote fractions.
///
/// Rows are assigned to folds class-stratified round-robin; each fold is
/// scored by a forest trained on the other folds with a seed derived from
/// the fold index. A class confined to a single fold cannot be
/// cross-validated and is reported as an error.
pub fn fit_calibrator(
    matrix: &DataMatrix,
    labels: &[usize],
    class_order: &[String],
    forest_cfg: &ForestConfig,
    calib_cfg: &CalibrationConfig,
) -> Result<Calibrator, ForestError> {
    if calib_cfg.method == CalibrationMethod::None {
        return Ok(Calibrator::None);
    }
    if calib_cfg.folds < 2 {
        return Err(ForestError::BadConfig("calibration needs >= 2 folds".into()));
    }
    let n = matrix.n_rows();
    let n_classes = class_order.len();
    let assignment = fold_assignment(labels, n_classes, calib_cfg.folds, class_order)?;

    let mut scores = vec![vec![0.0f64; n_classes]; n];
    for fold in 0..calib_cfg.folds {
        let train_rows: Vec<usize> = (0..n).filter(|&r| assignment[r] != fold).collect();
        let held_rows: Vec<usize> = (0..n).filter(|&r| assignment[r] == fold).collect();
        if held_rows.is_empty() {
            continue;
        }
        let sub_matrix = matrix.select_rows(&train_rows)?;
        let sub_labels: Vec<usize> = train_rows.iter().map(|&r| labels[r]).collect();
        let fold_cfg = ForestConfig {
            seed: forest_cfg
                .seed
                .wrapping_add(1_000_003u64.wrapping_mul(fold as u64 + 1)),
            ..forest_cfg.clone()
        };
        let fold_forest: TrainedForest =
            train_initial(&sub_matrix, &sub_labels, class_order, &fold_cfg)?;
        for &r in &held_rows {
            scores[r] = fold_forest.predict_proba(matrix.row(r));
        }
    }

    let params: Vec<(f64, f64)> = (0..n_classes)
        .map(|class| {
            let class_scores: Vec<f64> = scores.iter().map(|s| s[class]).collect();
            let targets: Vec<bool> = labels.iter().map(|&y| y == class).collect();
            platt_fit(&class_scores, &targets)
        })
        .collect();
    Ok(Calibrator::Sigmoid { params })
}

/// Fit sigmoid parameters `(a, b)` by regularized maximum likelihood with
/// Newton steps and a backtracking line search. Targets are smoothed
/// toward the class priors so separable inputs stay finite.
fn platt_fit(scores: &[f64], targets: &[bool]) -> (f64, f64) {
    let n = scores.len();
    let prior1 = targets.iter().filter(|&&t| t).count() as f64;
    let prior0 = n as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = targets.iter().map(|&y| if y { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        let mut f = 0.0;
        for (&s, &ti) in scores.iter().zip(&t) {
            let z = a * s + b;
            if z >= 0.0 {
                f += ti * z + (1.0 + (-z).exp()).ln();
            } else {
                f += (ti - 1.0) * z + (1.0 + z.exp()).ln();
            }
        }
        f
    };

    let sigma = 1e-12;
    let max_iter = 100;
    let min_step = 1e-10;
    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let mut fval = objective(a, b);

    for _ in 0..max_iter {
        let (mut h11, mut h22) = (sigma, sigma);
        let mut h21 = 0.0;
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&s, &ti) in scores.iter().zip(&t) {
            let z = a * s + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = ti - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        let mut advanced = false;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                advanced = true;
                break;
            }
            step /= 2.0;
        }
        if !advanced {
            break;
        }
    }
    (a, b)
}
