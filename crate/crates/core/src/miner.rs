//! Per-family mining of representative n-grams and one-gram histograms.
//!
//! A gram is representative for a family when its entropy clears the
//! per-length threshold and it is present in at least `floor(gamma * n_f)`
//! of the family's files (clamped to a minimum of one file). Presence is
//! per file: multiple occurrences inside one file count once.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Sample, SampleId};
use crate::entropy::{byte_entropy, EntropyThresholds};

/// Mining parameters. `memory_cap_bytes` is a soft guard on the candidate
/// table; exceeding it aborts mining instead of approximating.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Config {
    pub gamma: f64,
    pub memory_cap_bytes: Option<usize>,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            gamma: 0.1,
            memory_cap_bytes: None,
        }
    }
}

/// One representative gram with its per-family file-presence count.
#[derive(Debug, Clone, PartialEq)]
pub struct RepGram {
    pub gram: Vec<u8>,
    pub count: usize,
    pub entropy: f64,
}

/// All representatives of one family, grouped by gram length and sorted
/// by gram bytes within each length.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRepresentatives {
    pub family: String,
    pub per_length: std::collections::BTreeMap<usize, Vec<RepGram>>,
}

/// Histogram of byte values for one sample; counts sum to the file length.
#[derive(Debug, Clone, PartialEq)]
pub struct OneGramHistogram {
    pub sample_id: SampleId,
    pub counts: [u64; 256],
}

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("invalid stage-2 config: {0}")]
    BadConfig(String),
    #[error("family {family} is empty")]
    EmptyFamily { family: String },
    #[error(
        "candidate table for family {family} exceeded the memory cap \
         ({used} > {cap} bytes); raise the entropy factors or shard the corpus"
    )]
    MemoryCap { family: String, used: usize, cap: usize },
}

/// The deduplicated set of length-`n` substrings of `bytes` whose entropy
/// is at least `threshold`. Inputs shorter than `n` yield the empty set.
pub fn file_presence_grams(bytes: &[u8], n: usize, threshold: f64) -> BTreeSet<Vec<u8>> {
    let mut out = BTreeSet::new();
    if n == 0 || bytes.len() < n {
        return out;
    }
    for window in bytes.windows(n) {
        if byte_entropy(window) >= threshold {
            out.insert(window.to_vec());
        }
    }
    out
}

/// Approximate heap footprint of one candidate-table entry.
fn entry_cost(gram_len: usize) -> usize {
    gram_len + std::mem::size_of::<Vec<u8>>() + std::mem::size_of::<usize>() + 16
}

/// Mine the representative grams of one family for every configured length.
pub fn mine_family(
    family: &str,
    family_samples: &[&Sample],
    thresholds: &EntropyThresholds,
    cfg: &Stage2Config,
) -> Result<FamilyRepresentatives, MiningError> {
    if !(cfg.gamma > 0.0 && cfg.gamma <= 1.0) {
        return Err(MiningError::BadConfig(format!(
            "gamma must be in (0,1], got {}",
            cfg.gamma
        )));
    }
    if family_samples.is_empty() {
        return Err(MiningError::EmptyFamily {
            family: family.to_string(),
        });
    }

    let n_files = family_samples.len();
    let min_count = ((cfg.gamma * n_files as f64).floor() as usize).max(1);

    let mut per_length = std::collections::BTreeMap::new();
    for (n, stats) in &thresholds.per_length {
        let n = *n;
        let threshold = stats.threshold;

        // Per-file presence sets, merged into one count table. Counts are
        // additive, so the merge order cannot affect the result.
        let table: Result<HashMap<Vec<u8>, usize>, MiningError> = family_samples
            .par_iter()
            .map(|sample| {
                let mut local: HashMap<Vec<u8>, usize> = HashMap::new();
                if sample.bytes.len() >= n {
                    let mut seen: HashSet<&[u8]> = HashSet::new();
                    for window in sample.bytes.windows(n) {
                        if byte_entropy(window) >= threshold {
                            seen.insert(window);
                        }
                    }
                    local.reserve(seen.len());
                    for gram in seen {
                        local.insert(gram.to_vec(), 1);
                    }
                }
                Ok(local)
            })
            .try_reduce(HashMap::new, |mut acc, local| {
                for (gram, c) in local {
                    *acc.entry(gram).or_insert(0) += c;
                }
                if let Some(cap) = cfg.memory_cap_bytes {
                    let used: usize = acc.keys().map(|g| entry_cost(g.len())).sum();
                    if used > cap {
                        return Err(MiningError::MemoryCap {
                            family: family.to_string(),
                            used,
                            cap,
                        });
                    }
                }
                Ok(acc)
            });

        let table = table?;
        if let Some(cap) = cfg.memory_cap_bytes {
            let used: usize = table.keys().map(|g| entry_cost(g.len())).sum();
            if used > cap {
                return Err(MiningError::MemoryCap {
                    family: family.to_string(),
                    used,
                    cap,
                });
            }
        }

        let mut reps: Vec<RepGram> = table
            .into_iter()
            .filter(|(_, count)| *count >= min_count)
            .map(|(gram, count)| {
                let entropy = byte_entropy(&gram);
                RepGram { gram, count, entropy }
            })
            .collect();
        reps.sort_unstable_by(|a, b| a.gram.cmp(&b.gram));
        per_length.insert(n, reps);
    }

    Ok(FamilyRepresentatives {
        family: family.to_string(),
        per_length,
    })
}

/// Count every byte value of a file.
pub fn one_gram_histogram(sample_id: SampleId, bytes: &[u8]) -> OneGramHistogram {
    let mut counts = [0u64; 256];
    for &b in bytes {
        counts[b as usize] += 1;
    }
    OneGramHistogram { sample_id, counts }
}

impl FamilyRepresentatives {
    /// Debug dump: `family <tab> N <tab> hex(gram) <tab> count <tab> entropy`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (n, reps) in &self.per_length {
            for r in reps {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{:.16e}",
                    self.family,
                    n,
                    hex::encode(&r.gram),
                    r.count,
                    r.entropy
                );
            }
        }
        out
    }

    pub fn total_reps(&self) -> usize {
        self.per_length.values().map(Vec::len).sum()
    }
}
