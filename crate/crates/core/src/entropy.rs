//! Byte-value entropy of n-grams and per-length entropy thresholds.
//!
//! The threshold for length `N` is the average entropy of a randomized
//! sample of `N`-grams drawn from the training corpus, multiplied by a
//! per-length factor. Grams below the threshold are discarded by the
//! mining stage.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Sample;

/// Sampling parameters for threshold computation.
///
/// `lengths` must be sorted ascending with every entry >= 2; `alpha` is the
/// fraction of training files sampled per length, `beta` the number of gram
/// start positions drawn per sampled file, and `factors` maps each length to
/// the multiplier applied to the sampled average entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Config {
    pub lengths: Vec<usize>,
    pub alpha: f64,
    pub beta: usize,
    pub factors: BTreeMap<usize, f64>,
    pub seed: u64,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            lengths: vec![4, 8, 16, 32],
            alpha: 0.1,
            beta: 256,
            factors: BTreeMap::from([(4, 1.05), (8, 1.05), (16, 1.15), (32, 1.15)]),
            seed: 0,
        }
    }
}

impl Stage1Config {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        if self.lengths.is_empty() || !self.lengths.windows(2).all(|w| w[0] < w[1]) {
            return Err(ThresholdError::BadConfig(
                "lengths must be non-empty and sorted strictly ascending".into(),
            ));
        }
        if self.lengths[0] < 2 {
            return Err(ThresholdError::BadConfig("every length must be >= 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ThresholdError::BadConfig(format!(
                "alpha must be in (0,1], got {}",
                self.alpha
            )));
        }
        if self.beta < 1 {
            return Err(ThresholdError::BadConfig("beta must be >= 1".into()));
        }
        for n in &self.lengths {
            match self.factors.get(n) {
                Some(f) if *f >= 1.0 => {}
                Some(f) => {
                    return Err(ThresholdError::BadConfig(format!(
                        "factor for length {n} must be >= 1, got {f}"
                    )))
                }
                None => {
                    return Err(ThresholdError::BadConfig(format!(
                        "no factor configured for length {n}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Stable digest of the configuration, recorded alongside thresholds.
    pub fn digest(&self) -> String {
        let mut text = String::new();
        let _ = write!(text, "lengths=");
        for n in &self.lengths {
            let _ = write!(text, "{n},");
        }
        let _ = write!(text, ";alpha={:.16e};beta={};factors=", self.alpha, self.beta);
        for (n, f) in &self.factors {
            let _ = write!(text, "{n}:{f:.16e},");
        }
        let _ = write!(text, ";seed={}", self.seed);
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Average entropy and derived threshold for one gram length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthStats {
    pub avg_entropy: f64,
    pub factor: f64,
    pub threshold: f64,
}

/// Per-length thresholds plus provenance of the sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyThresholds {
    pub per_length: BTreeMap<usize, LengthStats>,
    pub config_digest: String,
    pub sampled_file_count: usize,
}

#[derive(Debug, Error)]
pub enum ThresholdError {
    #[error("invalid stage-1 config: {0}")]
    BadConfig(String),
    #[error("training side is empty")]
    EmptyTrainSet,
    #[error("no sampled file of length >= {0}; cannot derive a threshold for this length")]
    NoFileForLength(usize),
    #[error("thresholds text line {0}: {1}")]
    Parse(usize, String),
}

/// Shannon entropy (base 2) of the byte-value distribution of a gram.
///
/// Result is in bits, bounded by `min(8, log2(len))`. The empty gram has
/// no distribution and is rejected.
pub fn entropy_of(gram: &[u8]) -> Result<f64, ThresholdError> {
    if gram.is_empty() {
        return Err(ThresholdError::BadConfig("entropy of empty gram".into()));
    }
    Ok(byte_entropy(gram))
}

/// Entropy of a non-empty byte slice. Internal fast path shared by the
/// mining scan; `entropy_of` is the checked public surface.
pub(crate) fn byte_entropy(data: &[u8]) -> f64 {
    let mut counts = [0u32; 256];
    for &b in data {
        counts[b as usize] += 1;
    }
    let len = data.len() as f64;
    let mut h = 0.0;
    for &c in &counts {
        if c == 0 {
            continue;
        }
        let p = c as f64 / len;
        h -= p * p.log2();
    }
    h
}

/// Derive per-length entropy thresholds from the training side of a corpus.
///
/// For each length `N` (with its own RNG stream seeded `seed ^ N`):
/// `ceil(alpha * |train|)` files are drawn without replacement by shuffling
/// the train list and taking the prefix; each drawn file of length >= N
/// contributes `beta` grams at uniformly drawn start positions (with
/// replacement); shorter files contribute nothing. The threshold is the
/// average entropy of the drawn grams times the per-length factor.
pub fn compute_thresholds(
    train: &[&Sample],
    cfg: &Stage1Config,
) -> Result<EntropyThresholds, ThresholdError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(ThresholdError::EmptyTrainSet);
    }
    let n_files = ((cfg.alpha * train.len() as f64).ceil() as usize).max(1);

    // collect per-length results in order so errors surface deterministically
    let stats: Vec<Result<(usize, LengthStats), ThresholdError>> = cfg
        .lengths
        .par_iter()
        .map(|&n| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ n as u64);
            let mut order: Vec<usize> = (0..train.len()).collect();
            order.shuffle(&mut rng);
            let mut sum = 0.0;
            let mut drawn = 0u64;
            for &file_idx in order.iter().take(n_files) {
                let bytes = &train[file_idx].bytes;
                if bytes.len() < n {
                    continue;
                }
                for _ in 0..cfg.beta {
                    let start = rng.gen_range(0..=bytes.len() - n);
                    sum += byte_entropy(&bytes[start..start + n]);
                    drawn += 1;
                }
            }
            if drawn == 0 {
                return Err(ThresholdError::NoFileForLength(n));
            }
            let avg = sum / drawn as f64;
            let factor = cfg.factors[&n];
            Ok((
                n,
                LengthStats {
                    avg_entropy: avg,
                    factor,
                    threshold: avg * factor,
                },
            ))
        })
        .collect();

    let per_length = stats
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .collect();
    Ok(EntropyThresholds {
        per_length,
        config_digest: cfg.digest(),
        sampled_file_count: n_files,
    })
}

impl EntropyThresholds {
    pub fn threshold_for(&self, n: usize) -> Option<f64> {
        self.per_length.get(&n).map(|s| s.threshold)
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_length.keys().copied()
    }

    /// Text serialization: one line per length,
    /// `N <tab> avg <tab> factor <tab> threshold`, reals with 17
    /// significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, s) in &self.per_length {
            let _ = writeln!(
                out,
                "{n}\t{:.16e}\t{:.16e}\t{:.16e}",
                s.avg_entropy, s.factor, s.threshold
            );
        }
        out
    }

    pub fn from_text(
        text: &str,
        config_digest: String,
        sampled_file_count: usize,
    ) -> Result<Self, ThresholdError> {
        let mut per_length = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 4 {
                return Err(ThresholdError::Parse(i + 1, "expected 4 fields".into()));
            }
            let n: usize = parts[0]
                .parse()
                .map_err(|_| ThresholdError::Parse(i + 1, "bad length".into()))?;
            let nums: Vec<f64> = parts[1..]
                .iter()
                .map(|p| p.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| ThresholdError::Parse(i + 1, "bad real".into()))?;
            per_length.insert(
                n,
                LengthStats {
                    avg_entropy: nums[0],
                    factor: nums[1],
                    threshold: nums[2],
                },
            );
        }
        Ok(EntropyThresholds {
            per_length,
            config_digest,
            sampled_file_count,
        })
    }
}
