//! The self-contained trained-model artifact.
//!
//! A bundle is a directory of five files:
//!
//! * `meta`       — versioned text: family order, resolved configuration,
//!   and SHA-256 digests of the sibling files (written last);
//! * `thresholds` — per-length entropy threshold table;
//! * `features`   — the surviving tagged grams in the selector dump format;
//! * `forest`     — length-prefixed binary pre-order tree encoding,
//!   little-endian, plus the model-column source table;
//! * `calibrator` — text parameters of the probability calibrator.
//!
//! Classification needs nothing beyond the bundle and raw input bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::SampleId;
use crate::entropy::EntropyThresholds;
use crate::featurizer::{build_automaton, featurize, CompiledPatterns};
use crate::forest::{Calibrator, Node, TrainedForest, Tree};
use crate::metrics::argmax;
use crate::selector::{dump_features, parse_features, TaggedFeature};

pub const FORMAT_VERSION: u32 = 1;
const FOREST_MAGIC: &[u8; 4] = b"GSFB";

/// Where one model column reads its value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnSource {
    /// Presence bit of the pattern at this index of the bundle's canonical
    /// pattern order.
    Pattern(u32),
    /// Count of this byte value in the one-gram histogram.
    OneGram(u8),
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("bundle directory {0} already holds a model; refusing to overwrite")]
    AlreadyExists(PathBuf),
    #[error("unsupported bundle format version {0}")]
    UnknownVersion(u32),
    #[error("bundle file {0} failed its digest check; the bundle is corrupted")]
    DigestMismatch(String),
    #[error("bundle file {file}: {message}")]
    Parse { file: String, message: String },
    #[error("bundle is inconsistent: {0}")]
    Inconsistent(String),
}

fn parse_err(file: &str, message: impl Into<String>) -> BundleError {
    BundleError::Parse {
        file: file.to_string(),
        message: message.into(),
    }
}

/// A frozen trained model.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub families: Vec<String>,
    pub thresholds: EntropyThresholds,
    pub features: Vec<TaggedFeature>,
    pub compiled: CompiledPatterns,
    pub column_sources: Vec<ColumnSource>,
    pub forest: TrainedForest,
    pub calibrator: Calibrator,
    /// Resolved configuration, one `(key, value)` per line of `meta`.
    pub config_lines: Vec<(String, String)>,
}

impl ModelBundle {
    /// Assemble a bundle from trained parts, checking cross-consistency.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        families: Vec<String>,
        thresholds: EntropyThresholds,
        features: Vec<TaggedFeature>,
        column_sources: Vec<ColumnSource>,
        forest: TrainedForest,
        calibrator: Calibrator,
        config_lines: Vec<(String, String)>,
    ) -> Result<Self, BundleError> {
        let compiled =
            build_automaton(&features).map_err(|e| BundleError::Inconsistent(e.to_string()))?;
        let bundle = ModelBundle {
            families,
            thresholds,
            features,
            compiled,
            column_sources,
            forest,
            calibrator,
            config_lines,
        };
        bundle.check()?;
        Ok(bundle)
    }

    fn check(&self) -> Result<(), BundleError> {
        if self.forest.class_order != self.families {
            return Err(BundleError::Inconsistent(
                "forest class order differs from family order".into(),
            ));
        }
        if self.forest.importances.len() != self.column_sources.len() {
            return Err(BundleError::Inconsistent(format!(
                "forest has {} columns, source table has {}",
                self.forest.importances.len(),
                self.column_sources.len()
            )));
        }
        for src in &self.column_sources {
            if let ColumnSource::Pattern(i) = src {
                if *i as usize >= self.compiled.set.len() {
                    return Err(BundleError::Inconsistent(format!(
                        "column source references pattern {i} of {}",
                        self.compiled.set.len()
                    )));
                }
            }
        }
        // the features file order must equal the compiled pattern order
        for (i, f) in self.features.iter().enumerate() {
            if self.compiled.set.patterns()[i] != f.gram {
                return Err(BundleError::Inconsistent(
                    "feature list is not in canonical pattern order".into(),
                ));
            }
        }
        Ok(())
    }

    /// Classify raw bytes: calibrated class probabilities in canonical
    /// family order plus the predicted family.
    pub fn predict(&self, bytes: &[u8]) -> (Vec<f64>, String) {
        let (fv, _) = featurize(SampleId(String::new()), bytes, &self.compiled);
        let row: Vec<f64> = self
            .column_sources
            .iter()
            .map(|src| match src {
                ColumnSource::Pattern(i) => {
                    if fv.presence.get(*i as usize) {
                        1.0
                    } else {
                        0.0
                    }
                }
                ColumnSource::OneGram(b) => fv.one_grams[*b as usize] as f64,
            })
            .collect();
        let raw = self.forest.predict_proba(&row);
        let probs = self.calibrator.apply(&raw);
        let family = self.families[argmax(&probs)].clone();
        (probs, family)
    }

    // --- serialization ---

    fn forest_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(FOREST_MAGIC);
        out.push(1u8);
        out.extend_from_slice(&(self.families.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.column_sources.len() as u32).to_le_bytes());
        for src in &self.column_sources {
            match src {
                ColumnSource::Pattern(i) => {
                    out.push(0);
                    out.extend_from_slice(&i.to_le_bytes());
                }
                ColumnSource::OneGram(b) => {
                    out.push(1);
                    out.extend_from_slice(&u32::from(*b).to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&(self.forest.trees.len() as u32).to_le_bytes());
        for tree in &self.forest.trees {
            tree.encode_into(&mut out);
        }
        out
    }

    fn decode_forest(
        bytes: &[u8],
        families: Vec<String>,
    ) -> Result<(TrainedForest, Vec<ColumnSource>), BundleError> {
        let file = "forest";
        if bytes.len() < 5 || &bytes[..4] != FOREST_MAGIC {
            return Err(parse_err(file, "bad magic"));
        }
        if bytes[4] != 1 {
            return Err(parse_err(file, format!("unknown forest encoding {}", bytes[4])));
        }
        let mut pos = 5usize;
        let read_u32 = |pos: &mut usize| -> Result<u32, BundleError> {
            let end = *pos + 4;
            let chunk = bytes
                .get(*pos..end)
                .ok_or_else(|| parse_err(file, "truncated"))?;
            *pos = end;
            Ok(u32::from_le_bytes(chunk.try_into().unwrap()))
        };
        let n_classes = read_u32(&mut pos)? as usize;
        if n_classes != families.len() {
            return Err(parse_err(
                file,
                format!("{n_classes} classes, meta lists {}", families.len()),
            ));
        }
        let n_columns = read_u32(&mut pos)? as usize;
        let mut column_sources = Vec::with_capacity(n_columns);
        for _ in 0..n_columns {
            let kind = *bytes.get(pos).ok_or_else(|| parse_err(file, "truncated"))?;
            pos += 1;
            let idx = read_u32(&mut pos)?;
            column_sources.push(match kind {
                0 => ColumnSource::Pattern(idx),
                1 => ColumnSource::OneGram(
                    u8::try_from(idx).map_err(|_| parse_err(file, "one-gram index > 255"))?,
                ),
                other => return Err(parse_err(file, format!("unknown column kind {other}"))),
            });
        }
        let n_trees = read_u32(&mut pos)? as usize;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let (tree, used) =
                Tree::decode(&bytes[pos..], n_classes).map_err(|m| parse_err(file, m))?;
            pos += used;
            trees.push(tree);
        }
        if pos != bytes.len() {
            return Err(parse_err(file, "trailing bytes"));
        }
        // importances are not persisted; recover a diagnostic surrogate
        // from split counts so the struct stays well-formed
        let mut importances = vec![0.0f64; n_columns];
        let mut splits = 0usize;
        for t in &trees {
            for n in &t.nodes {
                if let Node::Split { column, .. } = n {
                    importances[*column as usize] += 1.0;
                    splits += 1;
                }
            }
        }
        if splits > 0 {
            importances.iter_mut().for_each(|v| *v /= splits as f64);
        }
        Ok((
            TrainedForest {
                trees,
                importances,
                class_order: families,
                inbag: Vec::new(),
            },
            column_sources,
        ))
    }

    fn meta_text(&self, digests: &[(&str, String)]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "format_version\t{FORMAT_VERSION}");
        let _ = writeln!(out, "families\t{}", self.families.join("\t"));
        for (k, v) in &self.config_lines {
            let _ = writeln!(out, "config\t{k}\t{v}");
        }
        let _ = writeln!(out, "sampled_file_count\t{}", self.thresholds.sampled_file_count);
        let _ = writeln!(out, "config_digest\t{}", self.thresholds.config_digest);
        for (name, digest) in digests {
            let _ = writeln!(out, "digest\t{name}\t{digest}");
        }
        out
    }

    /// Write the bundle into `dir`. The directory must not already hold a
    /// bundle; `meta` is written last so a partial write never validates.
    pub fn save(&self, dir: &Path) -> Result<(), BundleError> {
        std::fs::create_dir_all(dir).map_err(|e| BundleError::Io(dir.to_path_buf(), e))?;
        let meta_path = dir.join("meta");
        if meta_path.exists() {
            return Err(BundleError::AlreadyExists(dir.to_path_buf()));
        }
        let files = [
            ("thresholds", self.thresholds.to_text().into_bytes()),
            ("features", dump_features(&self.features).into_bytes()),
            ("forest", self.forest_bytes()),
            ("calibrator", self.calibrator.to_text().into_bytes()),
        ];
        let mut digests = Vec::new();
        for (name, bytes) in &files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| BundleError::Io(path.clone(), e))?;
            digests.push((*name, hex::encode(Sha256::digest(bytes))));
        }
        let meta = self.meta_text(&digests);
        std::fs::write(&meta_path, meta).map_err(|e| BundleError::Io(meta_path.clone(), e))?;
        Ok(())
    }

    /// Load and validate a bundle directory.
    pub fn load(dir: &Path) -> Result<Self, BundleError> {
        let read = |name: &str| -> Result<Vec<u8>, BundleError> {
            let path = dir.join(name);
            std::fs::read(&path).map_err(|e| BundleError::Io(path.clone(), e))
        };
        let meta_bytes = read("meta")?;
        let meta = String::from_utf8(meta_bytes)
            .map_err(|_| parse_err("meta", "not UTF-8"))?;

        let mut families: Option<Vec<String>> = None;
        let mut config_lines = Vec::new();
        let mut sampled_file_count = 0usize;
        let mut config_digest = String::new();
        let mut digests: Vec<(String, String)> = Vec::new();
        let mut version: Option<u32> = None;
        for line in meta.lines().filter(|l| !l.is_empty()) {
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "format_version" if fields.len() == 2 => {
                    version = Some(
                        fields[1]
                            .parse()
                            .map_err(|_| parse_err("meta", "bad format_version"))?,
                    );
                }
                "families" => {
                    families = Some(fields[1..].iter().map(|s| s.to_string()).collect());
                }
                "config" if fields.len() == 3 => {
                    config_lines.push((fields[1].to_string(), fields[2].to_string()));
                }
                "sampled_file_count" if fields.len() == 2 => {
                    sampled_file_count = fields[1]
                        .parse()
                        .map_err(|_| parse_err("meta", "bad sampled_file_count"))?;
                }
                "config_digest" if fields.len() == 2 => {
                    config_digest = fields[1].to_string();
                }
                "digest" if fields.len() == 3 => {
                    digests.push((fields[1].to_string(), fields[2].to_string()));
                }
                _ => return Err(parse_err("meta", format!("unrecognized line {line:?}"))),
            }
        }
        let version = version.ok_or_else(|| parse_err("meta", "missing format_version"))?;
        if version != FORMAT_VERSION {
            return Err(BundleError::UnknownVersion(version));
        }
        let families = families.ok_or_else(|| parse_err("meta", "missing families"))?;

        let mut contents: Vec<(String, Vec<u8>)> = Vec::new();
        for (name, expected) in &digests {
            let bytes = read(name)?;
            if hex::encode(Sha256::digest(&bytes)) != *expected {
                return Err(BundleError::DigestMismatch(name.clone()));
            }
            contents.push((name.clone(), bytes));
        }
        let find = |name: &str| -> Result<&Vec<u8>, BundleError> {
            contents
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, b)| b)
                .ok_or_else(|| parse_err("meta", format!("no digest entry for {name}")))
        };

        let thresholds_text = String::from_utf8(find("thresholds")?.clone())
            .map_err(|_| parse_err("thresholds", "not UTF-8"))?;
        let thresholds =
            EntropyThresholds::from_text(&thresholds_text, config_digest, sampled_file_count)
                .map_err(|e| parse_err("thresholds", e.to_string()))?;

        let features_text = String::from_utf8(find("features")?.clone())
            .map_err(|_| parse_err("features", "not UTF-8"))?;
        let features =
            parse_features(&features_text).map_err(|m| parse_err("features", m))?;

        let (forest, column_sources) = Self::decode_forest(find("forest")?, families.clone())?;

        let calibrator_text = String::from_utf8(find("calibrator")?.clone())
            .map_err(|_| parse_err("calibrator", "not UTF-8"))?;
        let calibrator =
            Calibrator::from_text(&calibrator_text).map_err(|m| parse_err("calibrator", m))?;

        ModelBundle::new(
            families,
            thresholds,
            features,
            column_sources,
            forest,
            calibrator,
            config_lines,
        )
    }
}
