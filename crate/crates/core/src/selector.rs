//! Pairwise-separating feature selection.
//!
//! Every mined representative is scored, for each family pair, by the
//! information gain of splitting the pair's files on gram presence. The
//! top `floor(B / C(k,2))` grams per pair are kept; a gram selected for
//! several pairs appears once, tagged with all of them.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Sample;
use crate::featurizer::compile_patterns;
use crate::miner::FamilyRepresentatives;

/// Total feature budget B, divided evenly across family pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage3Config {
    pub budget_b: usize,
}

impl Default for Stage3Config {
    fn default() -> Self {
        Stage3Config { budget_b: 50_000 }
    }
}

/// Presence counts of one gram within a family pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSplit {
    pub pair: (String, String),
    pub present_count_1: usize,
    pub present_count_2: usize,
    pub n_1: usize,
    pub n_2: usize,
}

/// A gain score attached to one family pair, names in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTag {
    pub families: (String, String),
    pub gain: f64,
}

/// One selected gram with every pair it separates and the families whose
/// mining stage produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedFeature {
    pub gram: Vec<u8>,
    pub entropy: f64,
    pub tags: Vec<PairTag>,
    pub origin_families: Vec<String>,
}

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("need at least 2 families, got {0}")]
    TooFewFamilies(usize),
    #[error("both pair sides are empty")]
    EmptyPair,
    #[error("budget {budget} is below the number of family pairs {pairs}; every pair needs at least one slot")]
    BudgetTooSmall { budget: usize, pairs: usize },
    #[error(transparent)]
    Featurize(#[from] crate::featurizer::FeaturizeError),
}

fn two_class_entropy(a: usize, b: usize) -> f64 {
    let total = (a + b) as f64;
    let mut h = 0.0;
    for c in [a, b] {
        if c > 0 {
            let g = c as f64 / total;
            h -= g * g.log2();
        }
    }
    h
}

/// Entropy of a two-family pool (in bits). Errors when both sides are empty.
pub fn pair_entropy(n_1: usize, n_2: usize) -> Result<f64, SelectError> {
    if n_1 + n_2 == 0 {
        return Err(SelectError::EmptyPair);
    }
    Ok(two_class_entropy(n_1, n_2))
}

/// Information gain of splitting the pair's files on gram presence.
///
/// Empty sides contribute zero entropy at zero weight; the result is
/// clamped to its mathematical range `[0, pair_entropy]`.
pub fn info_gain(split: &PairSplit) -> f64 {
    debug_assert!(split.present_count_1 <= split.n_1);
    debug_assert!(split.present_count_2 <= split.n_2);
    let f = (split.n_1 + split.n_2) as f64;
    let h_f = two_class_entropy(split.n_1, split.n_2);

    let l_1 = split.present_count_1;
    let l_2 = split.present_count_2;
    let r_1 = split.n_1 - l_1;
    let r_2 = split.n_2 - l_2;

    let h_l = if l_1 + l_2 == 0 { 0.0 } else { two_class_entropy(l_1, l_2) };
    let h_r = if r_1 + r_2 == 0 { 0.0 } else { two_class_entropy(r_1, r_2) };

    let gain = h_f - h_l * ((l_1 + l_2) as f64 / f) - h_r * ((r_1 + r_2) as f64 / f);
    gain.clamp(0.0, h_f)
}

/// Candidate ordering: gain descending, then shorter gram, then bytes.
pub fn candidate_order(a_gain: f64, a_gram: &[u8], b_gain: f64, b_gram: &[u8]) -> Ordering {
    b_gain
        .total_cmp(&a_gain)
        .then_with(|| a_gram.len().cmp(&b_gram.len()))
        .then_with(|| a_gram.cmp(b_gram))
}

/// Select the per-pair top-gain representatives across all family pairs.
///
/// `families` must be in canonical order with the train-side samples of
/// each family; `reps` holds the mining output for the same families in
/// the same order. The result is deduplicated, tag-merged, and sorted by
/// (length, bytes).
pub fn select_pairwise(
    reps: &[FamilyRepresentatives],
    families: &[(String, Vec<&Sample>)],
    cfg: &Stage3Config,
) -> Result<Vec<TaggedFeature>, SelectError> {
    let k = families.len();
    if k < 2 {
        return Err(SelectError::TooFewFamilies(k));
    }
    debug_assert_eq!(reps.len(), k);
    let n_pairs = k * (k - 1) / 2;
    let quota = cfg.budget_b / n_pairs;
    if quota == 0 {
        return Err(SelectError::BudgetTooSmall {
            budget: cfg.budget_b,
            pairs: n_pairs,
        });
    }

    // gram -> (entropy, origin families), across all families
    let mut gram_info: BTreeMap<&[u8], (f64, BTreeSet<usize>)> = BTreeMap::new();
    for (fi, fam_reps) in reps.iter().enumerate() {
        for grams in fam_reps.per_length.values() {
            for r in grams {
                gram_info
                    .entry(r.gram.as_slice())
                    .or_insert_with(|| (r.entropy, BTreeSet::new()))
                    .1
                    .insert(fi);
            }
        }
    }

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
        .collect();

    // Score each pair independently; merge afterwards in pair order.
    let per_pair: Vec<Result<Vec<(Vec<u8>, f64)>, SelectError>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut candidates: BTreeSet<&[u8]> = BTreeSet::new();
            for fi in [i, j] {
                for grams in reps[fi].per_length.values() {
                    for r in grams {
                        candidates.insert(r.gram.as_slice());
                    }
                }
            }
            if candidates.is_empty() {
                return Ok(Vec::new());
            }
            let patterns: Vec<Vec<u8>> = candidates.iter().map(|g| g.to_vec()).collect();
            let compiled = compile_patterns(patterns)?;
            let b = compiled.set.len();

            let count_family = |samples: &[&Sample]| -> Vec<usize> {
                samples
                    .par_iter()
                    .fold(
                        || vec![0usize; b],
                        |mut acc, s| {
                            for (col, hit) in compiled.presence(&s.bytes).into_iter().enumerate() {
                                if hit {
                                    acc[col] += 1;
                                }
                            }
                            acc
                        },
                    )
                    .reduce(
                        || vec![0usize; b],
                        |mut a, c| {
                            for (x, y) in a.iter_mut().zip(c) {
                                *x += y;
                            }
                            a
                        },
                    )
            };
            let counts_1 = count_family(&families[i].1);
            let counts_2 = count_family(&families[j].1);
            let n_1 = families[i].1.len();
            let n_2 = families[j].1.len();

            let mut scored: Vec<(Vec<u8>, f64)> = compiled
                .set
                .patterns()
                .iter()
                .enumerate()
                .map(|(col, gram)| {
                    let split = PairSplit {
                        pair: (families[i].0.clone(), families[j].0.clone()),
                        present_count_1: counts_1[col],
                        present_count_2: counts_2[col],
                        n_1,
                        n_2,
                    };
                    (gram.clone(), info_gain(&split))
                })
                .collect();
            scored.sort_unstable_by(|a, b| candidate_order(a.1, &a.0, b.1, &b.0));
            scored.truncate(quota);
            Ok(scored)
        })
        .collect();

    let mut merged: BTreeMap<Vec<u8>, Vec<PairTag>> = BTreeMap::new();
    for (&(i, j), selection) in pairs.iter().zip(per_pair) {
        for (gram, gain) in selection? {
            merged.entry(gram).or_default().push(PairTag {
                families: (families[i].0.clone(), families[j].0.clone()),
                gain,
            });
        }
    }

    let mut out: Vec<TaggedFeature> = merged
        .into_iter()
        .map(|(gram, tags)| {
            let (entropy, origins) = &gram_info[gram.as_slice()];
            TaggedFeature {
                gram,
                entropy: *entropy,
                tags,
                origin_families: origins.iter().map(|&fi| families[fi].0.clone()).collect(),
            }
        })
        .collect();
    out.sort_unstable_by(|a, b| {
        a.gram
            .len()
            .cmp(&b.gram.len())
            .then_with(|| a.gram.cmp(&b.gram))
    });
    Ok(out)
}

/// Dump format shared with the bundle `features` file:
/// `hex(gram) <tab> length <tab> entropy <tab> tag:gain;tag:gain;...`
/// with tags rendered `famA|famB` in canonical family order.
pub fn dump_features(features: &[TaggedFeature]) -> String {
    let mut out = String::new();
    for f in features {
        let tags: Vec<String> = f
            .tags
            .iter()
            .map(|t| format!("{}|{}:{:.16e}", t.families.0, t.families.1, t.gain))
            .collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{:.16e}\t{}",
            hex::encode(&f.gram),
            f.gram.len(),
            f.entropy,
            tags.join(";")
        );
    }
    out
}

/// Parse the dump format back into features. Origin families are not part
/// of the dump and come back empty.
pub fn parse_features(text: &str) -> Result<Vec<TaggedFeature>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(format!("features line {}: expected 4 fields", lineno + 1));
        }
        let gram = hex::decode(parts[0]).map_err(|e| format!("line {}: {e}", lineno + 1))?;
        let length: usize = parts[1].parse().map_err(|_| format!("line {}: bad length", lineno + 1))?;
        if gram.len() != length {
            return Err(format!("line {}: length field does not match gram", lineno + 1));
        }
        let entropy: f64 = parts[2].parse().map_err(|_| format!("line {}: bad entropy", lineno + 1))?;
        let mut tags = Vec::new();
        for tag in parts[3].split(';').filter(|t| !t.is_empty()) {
            let (pair, gain) = tag
                .rsplit_once(':')
                .ok_or_else(|| format!("line {}: bad tag {tag:?}", lineno + 1))?;
            let (a, b) = pair
                .split_once('|')
                .ok_or_else(|| format!("line {}: bad pair {pair:?}", lineno + 1))?;
            tags.push(PairTag {
                families: (a.to_string(), b.to_string()),
                gain: gain.parse().map_err(|_| format!("line {}: bad gain", lineno + 1))?,
            });
        }
        if tags.is_empty() {
            return Err(format!("line {}: feature has no tags", lineno + 1));
        }
        out.push(TaggedFeature {
            gram,
            entropy,
            tags,
            origin_families: Vec::new(),
        });
    }
    Ok(out)
}
