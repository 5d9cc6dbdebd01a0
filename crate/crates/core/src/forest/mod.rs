//! Randomized decision-tree ensemble: bootstrap bagging, per-node feature
//! subsampling, impurity-decrease importances, importance pruning with
//! retraining, and probability calibration.

mod calibrate;
mod tree;

pub use calibrate::{fit_calibrator, CalibrationConfig, CalibrationMethod, Calibrator};
pub use tree::{GrownTree, Node, Tree};

use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::argmax;

/// Training parameters. Defaults follow common library practice: trees
/// grown to purity on Gini impurity with `ceil(sqrt(dim))` candidate
/// columns per split.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features retained by the importance-pruning pass.
    pub feature_cap_c: usize,
    pub seed: u64,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Columns considered per split; `None` means `ceil(sqrt(dim))`.
    pub features_per_split: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 3000,
            feature_cap_c: 5000,
            seed: 0,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
        }
    }
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("matrix shape error: {0}")]
    Shape(String),
    #[error("training requires at least 2 classes")]
    SingleClass,
    #[error("class {0} has no training samples")]
    EmptyClass(String),
    #[error("invalid forest config: {0}")]
    BadConfig(String),
    #[error(
        "class {class} is confined to a single cross-validation fold; \
         use fewer folds"
    )]
    FoldMissingClass { class: String },
}

impl DataMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ForestError> {
        if rows.is_empty() {
            return Err(ForestError::Shape("no rows".into()));
        }
        let n_cols = rows[0].len();
        if n_cols == 0 {
            return Err(ForestError::Shape("zero columns".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(ForestError::Shape(format!(
                    "row {i} has {} columns, expected {n_cols}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Ok(DataMatrix {
            values,
            n_rows: rows.len(),
            n_cols,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    /// New matrix keeping only `cols`, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self, ForestError> {
        if cols.is_empty() {
            return Err(ForestError::Shape("no columns selected".into()));
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_cols) {
            return Err(ForestError::Shape(format!("column {bad} out of range")));
        }
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for r in 0..self.n_rows {
            for &c in cols {
                values.push(self.get(r, c));
            }
        }
        Ok(DataMatrix {
            values,
            n_rows: self.n_rows,
            n_cols: cols.len(),
        })
    }

    /// New matrix keeping only `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, ForestError> {
        if rows.is_empty() {
            return Err(ForestError::Shape("no rows selected".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            if r >= self.n_rows {
                return Err(ForestError::Shape(format!("row {r} out of range")));
            }
            values.extend_from_slice(self.row(r));
        }
        Ok(DataMatrix {
            values,
            n_rows: rows.len(),
            n_cols: self.n_cols,
        })
    }
}

/// A trained ensemble. Importances are normalized to sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedForest {
    pub trees: Vec<Tree>,
    pub importances: Vec<f64>,
    pub class_order: Vec<String>,
    /// Per-tree bootstrap membership; populated by training, empty after
    /// deserialization.
    pub inbag: Vec<Vec<bool>>,
}

fn effective_features_per_split(cfg: &ForestConfig, dim: usize) -> usize {
    cfg.features_per_split
        .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
        .clamp(1, dim)
}

fn validate_training_inputs(
    matrix: &DataMatrix,
    labels: &[usize],
    class_order: &[String],
    cfg: &ForestConfig,
) -> Result<(), ForestError> {
    if labels.len() != matrix.n_rows() {
        return Err(ForestError::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            matrix.n_rows()
        )));
    }
    if class_order.len() < 2 {
        return Err(ForestError::SingleClass);
    }
    if cfg.n_trees == 0 {
        return Err(ForestError::BadConfig("n_trees must be >= 1".into()));
    }
    if cfg.min_leaf == 0 {
        return Err(ForestError::BadConfig("min_leaf must be >= 1".into()));
    }
    if cfg.feature_cap_c == 0 {
        return Err(ForestError::BadConfig("feature cap must be >= 1".into()));
    }
    let mut seen = vec![false; class_order.len()];
    for &y in labels {
        if y >= class_order.len() {
            return Err(ForestError::Shape(format!("label {y} out of range")));
        }
        seen[y] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(ForestError::EmptyClass(class_order[missing].clone()));
    }
    Ok(())
}

/// Train the initial ensemble. Tree `t` derives its RNG from
/// `cfg.seed + t`, so results are identical for any thread count.
pub fn train_initial(
    matrix: &DataMatrix,
    labels: &[usize],
    class_order: &[String],
    cfg: &ForestConfig,
) -> Result<TrainedForest, ForestError> {
    validate_training_inputs(matrix, labels, class_order, cfg)?;
    let params = tree::GrowParams {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        features_per_split: effective_features_per_split(cfg, matrix.n_cols()),
        n_classes: class_order.len(),
    };

    let grown: Vec<GrownTree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| tree::grow_tree(matrix, labels, &params, cfg.seed.wrapping_add(t as u64)))
        .collect();

    // mean of per-tree normalized importances, renormalized
    let dim = matrix.n_cols();
    let mut importances = vec![0.0; dim];
    for g in &grown {
        let total: f64 = g.importance.iter().sum();
        if total > 0.0 {
            for (acc, &v) in importances.iter_mut().zip(&g.importance) {
                *acc += v / total;
            }
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in importances.iter_mut() {
            *v /= total;
        }
    } else {
        // no tree found any split; fall back to a uniform attribution
        importances.iter_mut().for_each(|v| *v = 1.0 / dim as f64);
    }

    let mut trees = Vec::with_capacity(grown.len());
    let mut inbag = Vec::with_capacity(grown.len());
    for g in grown {
        trees.push(g.tree);
        inbag.push(g.inbag);
    }
    Ok(TrainedForest {
        trees,
        importances,
        class_order: class_order.to_vec(),
        inbag,
    })
}

impl TrainedForest {
    /// Mean leaf class distribution over all trees; a probability simplex.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.class_order.len()];
        for t in &self.trees {
            t.accumulate_distribution(|c| row[c], &mut acc);
        }
        let n = self.trees.len() as f64;
        for v in acc.iter_mut() {
            *v /= n;
        }
        acc
    }

    /// Accuracy over rows evaluated only by trees whose bootstrap did not
    /// contain them. `None` when bootstrap bookkeeping is unavailable.
    pub fn oob_accuracy(&self, matrix: &DataMatrix, labels: &[usize]) -> Option<f64> {
        if self.inbag.len() != self.trees.len() {
            return None;
        }
        let mut evaluated = 0usize;
        let mut correct = 0usize;
        for r in 0..matrix.n_rows() {
            let mut acc = vec![0.0; self.class_order.len()];
            let mut any = false;
            for (t, inbag) in self.trees.iter().zip(&self.inbag) {
                if !inbag[r] {
                    t.accumulate_distribution(|c| matrix.get(r, c), &mut acc);
                    any = true;
                }
            }
            if !any {
                continue;
            }
            evaluated += 1;
            if argmax(&acc) == labels[r] {
                correct += 1;
            }
        }
        (evaluated > 0).then(|| correct as f64 / evaluated as f64)
    }
}

/// Keep the `C` most important columns (ties broken by canonical column
/// order), retrain on the reduced matrix, and return the surviving column
/// indices in ascending order alongside the new forest.
pub fn prune_and_retrain(
    forest: &TrainedForest,
    matrix: &DataMatrix,
    labels: &[usize],
    cfg: &ForestConfig,
) -> Result<(Vec<usize>, TrainedForest), ForestError> {
    let dim = matrix.n_cols();
    if forest.importances.len() != dim {
        return Err(ForestError::Shape(format!(
            "forest was trained on {} columns, matrix has {dim}",
            forest.importances.len()
        )));
    }
    let keep = cfg.feature_cap_c.min(dim);
    let mut ranked: Vec<usize> = (0..dim).collect();
    ranked.sort_by(|&a, &b| {
        forest.importances[b]
            .total_cmp(&forest.importances[a])
            .then_with(|| a.cmp(&b))
    });
    let mut survivors: Vec<usize> = ranked.into_iter().take(keep).collect();
    survivors.sort_unstable();

    let reduced = matrix.select_columns(&survivors)?;
    let retrained = train_initial(&reduced, labels, &forest.class_order, cfg)?;
    Ok((survivors, retrained))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn class_order(k: usize) -> Vec<String> {
        (0..k).map(|c| format!("c{c}")).collect()
    }

    /// Two classes split perfectly by column 0; columns 1..4 are noise.
    fn separable(n_per_class: usize, seed: u64) -> (DataMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2 {
            for _ in 0..n_per_class {
                let mut row = vec![class as f64];
                for _ in 0..4 {
                    row.push(rng.gen_range(0.0..10.0));
                }
                rows.push(row);
                labels.push(class);
            }
        }
        (DataMatrix::from_rows(rows).unwrap(), labels)
    }

    fn small_cfg(seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: 60,
            feature_cap_c: 5,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn separable_data_trains_to_perfection() {
        let (m, y) = separable(12, 5);
        // with every column visible per split, the separating column wins
        // every root split and takes essentially all the importance
        let cfg = ForestConfig {
            features_per_split: Some(5),
            ..small_cfg(1)
        };
        let f = train_initial(&m, &y, &class_order(2), &cfg).unwrap();
        for r in 0..m.n_rows() {
            let p = f.predict_proba(m.row(r));
            assert_eq!(argmax(&p), y[r]);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        assert!(f.importances[0] > 0.95, "importances: {:?}", f.importances);
        assert!((f.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn separating_column_dominates_under_default_subsampling() {
        let (m, y) = separable(12, 5);
        let f = train_initial(&m, &y, &class_order(2), &small_cfg(1)).unwrap();
        for r in 0..m.n_rows() {
            assert_eq!(argmax(&f.predict_proba(m.row(r))), y[r]);
        }
        let best = (0..5).max_by(|&a, &b| f.importances[a].total_cmp(&f.importances[b]));
        assert_eq!(best, Some(0));
        assert!(f.importances[0] > 0.5, "importances: {:?}", f.importances);
    }

    #[test]
    fn shuffled_labels_have_chance_level_oob_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 120;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        // labels independent of features: a random permutation of a
        // balanced assignment
        let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        use rand::seq::SliceRandom;
        labels.shuffle(&mut rng);
        let m = DataMatrix::from_rows(rows).unwrap();
        let cfg = ForestConfig {
            n_trees: 120,
            feature_cap_c: 6,
            seed: 9,
            ..Default::default()
        };
        let f = train_initial(&m, &labels, &class_order(2), &cfg).unwrap();
        let oob = f.oob_accuracy(&m, &labels).unwrap();
        assert!(
            (oob - 0.5).abs() < 0.15,
            "oob accuracy {oob} is far from chance"
        );
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let (m, y) = separable(10, 77);
        let a = train_initial(&m, &y, &class_order(2), &small_cfg(3)).unwrap();
        let b = train_initial(&m, &y, &class_order(2), &small_cfg(3)).unwrap();
        assert_eq!(a.trees, b.trees);
        assert_eq!(a.importances, b.importances);
        let c = train_initial(&m, &y, &class_order(2), &small_cfg(4)).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn single_class_is_rejected() {
        let m = DataMatrix::from_rows(vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            train_initial(&m, &[0, 0], &["only".to_string()], &small_cfg(0)),
            Err(ForestError::SingleClass)
        ));
        // two declared classes, one empty
        assert!(matches!(
            train_initial(&m, &[0, 0], &class_order(2), &small_cfg(0)),
            Err(ForestError::EmptyClass(_))
        ));
    }

    #[test]
    fn prune_with_cap_at_dim_is_a_no_op_on_columns() {
        let (m, y) = separable(10, 2);
        let cfg = ForestConfig {
            n_trees: 40,
            feature_cap_c: 5,
            seed: 8,
            ..Default::default()
        };
        let f = train_initial(&m, &y, &class_order(2), &cfg).unwrap();
        let (cols, f2) = prune_and_retrain(&f, &m, &y, &cfg).unwrap();
        assert_eq!(cols, vec![0, 1, 2, 3, 4]);
        assert!((f2.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn prune_to_one_keeps_the_separating_column() {
        let (m, y) = separable(10, 2);
        let cfg = ForestConfig {
            n_trees: 40,
            feature_cap_c: 1,
            seed: 8,
            ..Default::default()
        };
        let f = train_initial(&m, &y, &class_order(2), &cfg).unwrap();
        let (cols, f2) = prune_and_retrain(&f, &m, &y, &cfg).unwrap();
        assert_eq!(cols, vec![0]);
        let reduced = m.select_columns(&cols).unwrap();
        for r in 0..reduced.n_rows() {
            assert_eq!(argmax(&f2.predict_proba(reduced.row(r))), y[r]);
        }
    }

    #[test]
    fn planted_signature_columns_survive_pruning() {
        // 10 planted indicator columns + 1000 noise columns, C = 50:
        // every planted column must survive, across 5 seeds.
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF + seed);
            let k = 5;
            let per_class = 30;
            let n = k * per_class;
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for class in 0..k {
                for _ in 0..per_class {
                    let mut row = vec![0.0f64; 10 + 1000];
                    // two indicator columns per class
                    row[class * 2] = 1.0;
                    row[class * 2 + 1] = 1.0;
                    for v in row.iter_mut().skip(10) {
                        *v = if rng.gen_bool(0.3) { 1.0 } else { 0.0 };
                    }
                    rows.push(row);
                    labels.push(class);
                }
            }
            let m = DataMatrix::from_rows(rows).unwrap();
            let cfg = ForestConfig {
                n_trees: 150,
                feature_cap_c: 50,
                seed,
                ..Default::default()
            };
            let f = train_initial(&m, &labels, &class_order(k), &cfg).unwrap();
            let (cols, _) = prune_and_retrain(&f, &m, &labels, &cfg).unwrap();
            for planted in 0..10 {
                assert!(
                    cols.contains(&planted),
                    "seed {seed}: planted column {planted} pruned away; kept {cols:?}"
                );
            }
        }
    }

    #[test]
    fn empty_row_predicts_a_valid_simplex() {
        let (m, y) = separable(8, 4);
        let f = train_initial(&m, &y, &class_order(2), &small_cfg(6)).unwrap();
        let p = f.predict_proba(&[0.0; 5]);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
