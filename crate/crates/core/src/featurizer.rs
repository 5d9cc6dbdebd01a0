//! Multi-pattern featurization: compile the selected grams into one
//! automaton, then derive per-file feature vectors of dimension B + 256
//! (binary gram presence plus raw one-gram counts).

use std::collections::HashMap;
use std::fmt::Write as _;

use aho_corasick::AhoCorasick;
use thiserror::Error;

use crate::corpus::SampleId;
use crate::miner::one_gram_histogram;
use crate::selector::TaggedFeature;

#[derive(Debug, Error)]
pub enum FeaturizeError {
    #[error("duplicate pattern: {0}")]
    DuplicatePattern(String),
    #[error("pattern set is empty")]
    EmptyPatternSet,
    #[error("empty pattern is not allowed")]
    EmptyPattern,
    #[error("automaton construction failed: {0}")]
    Build(String),
}

/// The frozen, canonically ordered pattern list. Column `j` of every
/// feature vector refers to `patterns[j]` across train and classify;
/// the order is (length ascending, bytes lexicographic).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    patterns: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl PatternSet {
    pub fn patterns(&self) -> &[Vec<u8>] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn column_of(&self, gram: &[u8]) -> Option<usize> {
        self.index.get(gram).copied()
    }
}

/// A pattern set compiled for simultaneous matching in one pass.
#[derive(Debug, Clone)]
pub struct CompiledPatterns {
    pub set: PatternSet,
    automaton: AhoCorasick,
}

/// Feature vector: packed presence bitmap over the pattern columns plus
/// the 256 one-gram counts. Total dimension is `patterns + 256`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub sample_id: SampleId,
    pub presence: PresenceBitmap,
    pub one_grams: [u64; 256],
}

/// Per-pattern total occurrence counts (overlaps included). Diagnostic
/// only; the model consumes presence bits.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchStats {
    pub counts: Vec<u64>,
}

/// Packed bit vector, most significant bit of each byte first, so the hex
/// rendering reads in column order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresenceBitmap {
    bits: Vec<u8>,
    len: usize,
}

impl PresenceBitmap {
    pub fn zeros(len: usize) -> Self {
        PresenceBitmap {
            bits: vec![0u8; len.div_ceil(8)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, j: usize) -> bool {
        assert!(j < self.len);
        self.bits[j >> 3] & (0x80 >> (j & 7)) != 0
    }

    pub fn set(&mut self, j: usize) {
        assert!(j < self.len);
        self.bits[j >> 3] |= 0x80 >> (j & 7);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bits)
    }
}

/// Canonicalize, deduplicate-check, and compile a raw pattern list.
pub fn compile_patterns(mut patterns: Vec<Vec<u8>>) -> Result<CompiledPatterns, FeaturizeError> {
    if patterns.is_empty() {
        return Err(FeaturizeError::EmptyPatternSet);
    }
    if patterns.iter().any(|p| p.is_empty()) {
        return Err(FeaturizeError::EmptyPattern);
    }
    patterns.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    for w in patterns.windows(2) {
        if w[0] == w[1] {
            return Err(FeaturizeError::DuplicatePattern(hex::encode(&w[0])));
        }
    }
    let index = patterns
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();
    let automaton = AhoCorasick::new(&patterns).map_err(|e| FeaturizeError::Build(e.to_string()))?;
    Ok(CompiledPatterns {
        set: PatternSet { patterns, index },
        automaton,
    })
}

/// Compile the grams of already-selected features.
pub fn build_automaton(features: &[TaggedFeature]) -> Result<CompiledPatterns, FeaturizeError> {
    compile_patterns(features.iter().map(|f| f.gram.clone()).collect())
}

impl CompiledPatterns {
    /// Presence flags for every pattern, via one overlapping scan.
    pub fn presence(&self, bytes: &[u8]) -> Vec<bool> {
        let mut out = vec![false; self.set.len()];
        for m in self.automaton.find_overlapping_iter(bytes) {
            out[m.pattern().as_usize()] = true;
        }
        out
    }
}

/// Featurize one file: presence bit per pattern, one-gram histogram, and
/// total occurrence counts as diagnostics.
pub fn featurize(
    sample_id: SampleId,
    bytes: &[u8],
    compiled: &CompiledPatterns,
) -> (FeatureVector, MatchStats) {
    let b = compiled.set.len();
    let mut presence = PresenceBitmap::zeros(b);
    let mut counts = vec![0u64; b];
    for m in compiled.automaton.find_overlapping_iter(bytes) {
        let j = m.pattern().as_usize();
        counts[j] += 1;
        presence.set(j);
    }
    let hist = one_gram_histogram(sample_id.clone(), bytes);
    (
        FeatureVector {
            sample_id,
            presence,
            one_grams: hist.counts,
        },
        MatchStats { counts },
    )
}

impl FeatureVector {
    /// Total dimension: pattern columns plus the 256 one-gram columns.
    pub fn dim(&self) -> usize {
        self.presence.len() + 256
    }

    /// Column accessor over the combined feature space.
    pub fn value(&self, col: usize) -> f64 {
        let b = self.presence.len();
        if col < b {
            if self.presence.get(col) {
                1.0
            } else {
                0.0
            }
        } else {
            self.one_grams[col - b] as f64
        }
    }
}

/// Debug dump of a featurized corpus: header `B <tab> k`, then one line
/// per sample: `id <tab> family <tab> hex(presence) <tab> 256 counts`.
pub fn dump_matrix(rows: &[(String, FeatureVector)], b: usize, k: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{b}\t{k}");
    for (family, fv) in rows {
        let counts: Vec<String> = fv.one_grams.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            fv.sample_id,
            family,
            fv.presence.to_hex(),
            counts.join(" ")
        );
    }
    out
}
