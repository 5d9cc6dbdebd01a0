//! Labeled corpus loading, validation, and deterministic partitioning.
//!
//! A corpus is described by a tab-separated manifest (`<relative_path>\t<family>`,
//! one entry per line, UTF-8) next to a root directory holding the raw byte
//! files. Files are read verbatim; the pipeline is deliberately format-blind.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Stable sample identifier: the manifest-relative path string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleId(pub String);

impl std::fmt::Display for SampleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// One labeled file: raw bytes read verbatim from disk.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: SampleId,
    pub path: PathBuf,
    pub family: String,
    pub bytes: Vec<u8>,
}

/// A loaded corpus. Families are kept in lexicographic (canonical) order;
/// all per-family indices downstream refer to this order.
#[derive(Debug, Clone)]
pub struct Corpus {
    samples: Vec<Sample>,
    families: Vec<String>,
}

/// Deterministic train/test partition of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train_ids: BTreeSet<SampleId>,
    pub test_ids: BTreeSet<SampleId>,
    pub seed: u64,
    pub fraction: f64,
}

impl Eq for Corpus {}
impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.families == other.families
            && self.samples.len() == other.samples.len()
            && self
                .samples
                .iter()
                .zip(&other.samples)
                .all(|(a, b)| a.id == b.id && a.family == b.family && a.bytes == b.bytes)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest {0}: cannot read: {1}")]
    ManifestRead(PathBuf, std::io::Error),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("manifest line {0}: expected `<path>\\t<family>`, got {1:?}")]
    MalformedLine(usize, String),
    #[error("duplicate sample path in manifest: {0}")]
    DuplicatePath(String),
    #[error("cannot read sample file {0}: {1}")]
    SampleRead(PathBuf, std::io::Error),
    #[error("fraction must be in (0,1), got {0}")]
    BadFraction(f64),
    #[error("families with fewer than 2 samples cannot be split: {0}")]
    FamilyTooSmall(String),
    #[error("family name {0:?} contains a reserved character (tab, newline, '|', ';' or ':')")]
    BadFamilyName(String),
}

impl Corpus {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Family labels in canonical (lexicographic) order.
    pub fn families(&self) -> &[String] {
        &self.families
    }

    /// Number of distinct families.
    pub fn k(&self) -> usize {
        self.families.len()
    }

    pub fn sample_by_id(&self, id: &SampleId) -> Option<&Sample> {
        self.samples.iter().find(|s| &s.id == id)
    }

    /// Samples grouped by family in canonical family order, optionally
    /// restricted to an id set (e.g. the train side of a split). Within a
    /// family, samples keep manifest order.
    pub fn family_view<'a>(
        &'a self,
        restrict: Option<&BTreeSet<SampleId>>,
    ) -> Vec<(String, Vec<&'a Sample>)> {
        self.families
            .iter()
            .map(|fam| {
                let members = self
                    .samples
                    .iter()
                    .filter(|s| &s.family == fam)
                    .filter(|s| restrict.is_none_or(|ids| ids.contains(&s.id)))
                    .collect();
                (fam.clone(), members)
            })
            .collect()
    }

    /// Build a corpus from already-loaded samples (used by tests and the
    /// synthetic generator). Families are derived and canonically ordered.
    pub fn from_samples(samples: Vec<Sample>) -> Result<Self, CorpusError> {
        if samples.is_empty() {
            return Err(CorpusError::EmptyManifest);
        }
        let mut seen = BTreeSet::new();
        for s in &samples {
            if !seen.insert(s.id.clone()) {
                return Err(CorpusError::DuplicatePath(s.id.0.clone()));
            }
            // family labels appear in tag and report formats that use
            // these characters as separators
            if s.family.contains(['\t', '\n', '|', ';', ':']) {
                return Err(CorpusError::BadFamilyName(s.family.clone()));
            }
        }
        let families: BTreeSet<String> = samples.iter().map(|s| s.family.clone()).collect();
        Ok(Corpus {
            samples,
            families: families.into_iter().collect(),
        })
    }
}

/// Load a corpus from a manifest of `<relative_path>\t<family>` lines.
///
/// Sample order equals manifest order; bytes are read verbatim with no
/// transcoding or trimming. Zero-length files are legal samples.
pub fn load_corpus(root_dir: &Path, manifest: &Path) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(manifest)
        .map_err(|e| CorpusError::ManifestRead(manifest.to_path_buf(), e))?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (rel, family) = line
            .split_once('\t')
            .ok_or_else(|| CorpusError::MalformedLine(lineno + 1, line.to_string()))?;
        if rel.is_empty() || family.is_empty() {
            return Err(CorpusError::MalformedLine(lineno + 1, line.to_string()));
        }
        let full = root_dir.join(rel);
        let bytes =
            std::fs::read(&full).map_err(|e| CorpusError::SampleRead(full.clone(), e))?;
        samples.push(Sample {
            id: SampleId(rel.to_string()),
            path: PathBuf::from(rel),
            family: family.to_string(),
            bytes,
        });
    }
    Corpus::from_samples(samples)
}

/// Stratified split: per family, `ceil(fraction * n_f)` samples go to the
/// train side. The assignment is a deterministic function of the seed and
/// the sorted sample ids.
pub fn stratified_split(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Split, CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::BadFraction(fraction));
    }
    let mut per_family: BTreeMap<&str, Vec<&SampleId>> = BTreeMap::new();
    for s in corpus.samples() {
        per_family.entry(&s.family).or_default().push(&s.id);
    }
    for (fam, ids) in &per_family {
        if ids.len() < 2 {
            return Err(CorpusError::FamilyTooSmall((*fam).to_string()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_ids = BTreeSet::new();
    let mut test_ids = BTreeSet::new();
    for (_fam, mut ids) in per_family {
        ids.sort();
        ids.shuffle(&mut rng);
        let n_train = (fraction * ids.len() as f64).ceil() as usize;
        for (i, id) in ids.into_iter().enumerate() {
            if i < n_train {
                train_ids.insert(id.clone());
            } else {
                test_ids.insert(id.clone());
            }
        }
    }
    Ok(Split {
        train_ids,
        test_ids,
        seed,
        fraction,
    })
}

impl Split {
    /// Canonical text rendering; byte-identical for identical inputs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed\t{}", self.seed);
        let _ = writeln!(out, "fraction\t{}", self.fraction);
        for id in &self.train_ids {
            let _ = writeln!(out, "train\t{id}");
        }
        for id in &self.test_ids {
            let _ = writeln!(out, "test\t{id}");
        }
        out
    }
}
