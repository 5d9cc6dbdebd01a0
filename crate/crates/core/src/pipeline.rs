//! End-to-end model generation: thresholds, mining, selection,
//! featurization, and forest training, timed per stage and packaged into
//! a model bundle.

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::bundle::{BundleError, ColumnSource, ModelBundle};
use crate::corpus::{Corpus, Sample};
use crate::entropy::{compute_thresholds, Stage1Config, ThresholdError};
use crate::featurizer::{compile_patterns, featurize, FeatureVector, FeaturizeError};
use crate::forest::{
    fit_calibrator, prune_and_retrain, train_initial, CalibrationConfig, DataMatrix, ForestConfig,
    ForestError,
};
use crate::miner::{mine_family, FamilyRepresentatives, MiningError, Stage2Config};
use crate::selector::{select_pairwise, SelectError, Stage3Config, TaggedFeature};

/// Labels of the five pipeline stages, in execution order. The training
/// command prints one timing row per label.
pub const STAGE_LABELS: [&str; 5] = [
    "entropy thresholds",
    "family representatives",
    "pairwise selection",
    "feature vectors",
    "forest training",
];

/// Wall-clock seconds per stage, indexed like `STAGE_LABELS`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTimings {
    pub seconds: [f64; 5],
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.seconds.iter().sum()
    }

    /// The timing table printed after training.
    pub fn render(&self) -> String {
        let width = STAGE_LABELS.iter().map(|l| l.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (label, secs) in STAGE_LABELS.iter().zip(self.seconds) {
            out.push_str(&format!("{label:<width$}  {secs:>10.3} s\n"));
        }
        out.push_str(&format!("{:<width$}  {:>10.3} s\n", "total", self.total()));
        out
    }
}

/// The resolved configuration of one training run. The same seed feeds
/// the sampling and training stages; their RNG streams are domain-split
/// internally.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub stage3: Stage3Config,
    pub forest: ForestConfig,
    pub calibration: CalibrationConfig,
    /// Provenance only: where the corpus came from.
    pub corpus_root: String,
    pub manifest: String,
}

impl RunConfig {
    pub fn with_seed(seed: u64) -> Self {
        RunConfig {
            stage1: Stage1Config { seed, ..Default::default() },
            stage2: Stage2Config::default(),
            stage3: Stage3Config::default(),
            forest: ForestConfig { seed, ..Default::default() },
            calibration: CalibrationConfig::default(),
            corpus_root: String::new(),
            manifest: String::new(),
        }
    }

    /// Key/value lines recorded in the bundle `meta` file. Thread count is
    /// deliberately absent: results are thread-count-invariant and the
    /// meta file must be too.
    pub fn meta_lines(&self) -> Vec<(String, String)> {
        let lengths = self
            .stage1
            .lengths
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let factors = self
            .stage1
            .factors
            .iter()
            .map(|(n, f)| format!("{n}={f}"))
            .collect::<Vec<_>>()
            .join(",");
        let mut lines = vec![
            ("corpus_root".to_string(), self.corpus_root.clone()),
            ("manifest".to_string(), self.manifest.clone()),
            ("seed".to_string(), self.stage1.seed.to_string()),
            ("lengths".to_string(), lengths),
            ("alpha".to_string(), self.stage1.alpha.to_string()),
            ("beta".to_string(), self.stage1.beta.to_string()),
            ("factors".to_string(), factors),
            ("gamma".to_string(), self.stage2.gamma.to_string()),
            (
                "memory_cap_bytes".to_string(),
                self.stage2
                    .memory_cap_bytes
                    .map_or("none".to_string(), |v| v.to_string()),
            ),
            ("budget".to_string(), self.stage3.budget_b.to_string()),
            ("trees".to_string(), self.forest.n_trees.to_string()),
            ("feature_cap".to_string(), self.forest.feature_cap_c.to_string()),
            (
                "max_depth".to_string(),
                self.forest.max_depth.map_or("none".to_string(), |v| v.to_string()),
            ),
            ("min_leaf".to_string(), self.forest.min_leaf.to_string()),
            (
                "features_per_split".to_string(),
                self.forest
                    .features_per_split
                    .map_or("sqrt".to_string(), |v| v.to_string()),
            ),
            ("forest_seed".to_string(), self.forest.seed.to_string()),
            ("calibration".to_string(), self.calibration.method.name().to_string()),
            ("folds".to_string(), self.calibration.folds.to_string()),
        ];
        lines.retain(|(_, v)| !v.is_empty());
        lines
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: StageError,
    },
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Featurize(#[from] FeaturizeError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        let PipelineError::Stage { stage, .. } = self;
        stage
    }
}

fn at_stage<T, E: Into<StageError>>(
    stage: &'static str,
    r: Result<T, E>,
) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::Stage { stage, source: e.into() })
}

/// Everything the training run produces besides the bundle itself.
#[derive(Debug)]
pub struct TrainOutput {
    pub bundle: ModelBundle,
    pub timings: StageTimings,
    pub representatives: Vec<FamilyRepresentatives>,
    pub selected: Vec<TaggedFeature>,
    /// Featurized training rows in corpus order: `(family, vector)`.
    pub train_rows: Vec<(String, FeatureVector)>,
}

/// Run the five model-generation stages over (the train side of) a corpus.
pub fn train_model(corpus: &Corpus, cfg: &RunConfig) -> Result<TrainOutput, PipelineError> {
    if corpus.k() < 2 {
        return Err(PipelineError::Stage {
            stage: STAGE_LABELS[4],
            source: StageError::Data(format!(
                "need >= 2 families to train, got {}",
                corpus.k()
            )),
        });
    }
    let families = corpus.family_view(None);
    let train_samples: Vec<&Sample> = corpus.samples().iter().collect();

    // stage 1: entropy thresholds
    let t0 = Instant::now();
    let thresholds = at_stage(
        STAGE_LABELS[0],
        compute_thresholds(&train_samples, &cfg.stage1),
    )?;
    let t_stage1 = t0.elapsed().as_secs_f64();

    // stage 2: per-family representative mining
    let t0 = Instant::now();
    let rep_results: Vec<Result<FamilyRepresentatives, MiningError>> = families
        .par_iter()
        .map(|(name, samples)| mine_family(name, samples, &thresholds, &cfg.stage2))
        .collect();
    let mut representatives = Vec::with_capacity(rep_results.len());
    for r in rep_results {
        representatives.push(at_stage(STAGE_LABELS[1], r)?);
    }
    let t_stage2 = t0.elapsed().as_secs_f64();

    // stage 3: pairwise information-gain selection
    let t0 = Instant::now();
    let selected = at_stage(
        STAGE_LABELS[2],
        select_pairwise(&representatives, &families, &cfg.stage3),
    )?;
    if selected.is_empty() {
        return Err(PipelineError::Stage {
            stage: STAGE_LABELS[2],
            source: StageError::Data(
                "no features were selected; the corpus may be too uniform".into(),
            ),
        });
    }
    let t_stage3 = t0.elapsed().as_secs_f64();

    // stage 4: feature vectors of dimension B + 256
    let t0 = Instant::now();
    let compiled = at_stage(
        STAGE_LABELS[3],
        compile_patterns(selected.iter().map(|f| f.gram.clone()).collect()),
    )?;
    let train_rows: Vec<(String, FeatureVector)> = train_samples
        .par_iter()
        .map(|s| {
            let (fv, _) = featurize(s.id.clone(), &s.bytes, &compiled);
            (s.family.clone(), fv)
        })
        .collect();
    let b = compiled.set.len();
    let dim = b + 256;
    let rows: Vec<Vec<f64>> = train_rows
        .par_iter()
        .map(|(_, fv)| (0..dim).map(|c| fv.value(c)).collect())
        .collect();
    let matrix = at_stage(STAGE_LABELS[3], DataMatrix::from_rows(rows))?;
    let labels: Vec<usize> = train_rows
        .iter()
        .map(|(family, _)| {
            corpus
                .families()
                .iter()
                .position(|f| f == family)
                .expect("family is canonical")
        })
        .collect();
    let t_stage4 = t0.elapsed().as_secs_f64();

    // stage 5: train, prune to the feature cap, retrain, calibrate
    let t0 = Instant::now();
    let class_order: Vec<String> = corpus.families().to_vec();
    let initial = at_stage(
        STAGE_LABELS[4],
        train_initial(&matrix, &labels, &class_order, &cfg.forest),
    )?;
    let (survivors, final_forest) = at_stage(
        STAGE_LABELS[4],
        prune_and_retrain(&initial, &matrix, &labels, &cfg.forest),
    )?;

    // split survivors into surviving patterns and one-gram columns
    let surviving_features: Vec<TaggedFeature> = survivors
        .iter()
        .filter(|&&c| c < b)
        .map(|&c| selected[c].clone())
        .collect();
    let mut pattern_rank = vec![u32::MAX; b];
    for (new_idx, &c) in survivors.iter().filter(|&&c| c < b).enumerate() {
        pattern_rank[c] = new_idx as u32;
    }
    let column_sources: Vec<ColumnSource> = survivors
        .iter()
        .map(|&c| {
            if c < b {
                ColumnSource::Pattern(pattern_rank[c])
            } else {
                ColumnSource::OneGram((c - b) as u8)
            }
        })
        .collect();

    let reduced = at_stage(STAGE_LABELS[4], matrix.select_columns(&survivors))?;
    let calibrator = at_stage(
        STAGE_LABELS[4],
        fit_calibrator(&reduced, &labels, &class_order, &cfg.forest, &cfg.calibration),
    )?;
    let t_stage5 = t0.elapsed().as_secs_f64();

    let bundle = at_stage(
        STAGE_LABELS[4],
        ModelBundle::new(
            class_order,
            thresholds,
            surviving_features,
            column_sources,
            final_forest,
            calibrator,
            cfg.meta_lines(),
        ),
    )?;

    Ok(TrainOutput {
        bundle,
        timings: StageTimings {
            seconds: [t_stage1, t_stage2, t_stage3, t_stage4, t_stage5],
        },
        representatives,
        selected,
        train_rows,
    })
}
