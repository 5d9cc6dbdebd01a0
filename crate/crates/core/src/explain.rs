//! Human-readable explanation reports.
//!
//! Every selected gram carries the family pairs it separates and the gain
//! it earned for each. The report lists, per pair, the strongest surviving
//! separators, and per family the features most distinctive of it.

use std::fmt::Write as _;

use thiserror::Error;

use crate::bundle::ModelBundle;
use crate::selector::dump_features;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLine {
    pub hex: String,
    /// Printable-ASCII rendering, `.` for everything else.
    pub ascii: String,
    pub length: usize,
    pub entropy: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSection {
    pub pair: (String, String),
    pub entries: Vec<FeatureLine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySection {
    pub family: String,
    pub entries: Vec<FeatureLine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainReport {
    pub pairs: Vec<PairSection>,
    pub families: Vec<FamilySection>,
}

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("unknown family {name:?}; known families: {known}")]
    UnknownFamily { name: String, known: String },
    #[error("a pair needs two distinct families")]
    DegeneratePair,
}

pub fn ascii_render(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|&b| {
            if (0x20..=0x7e).contains(&b) {
                b as char
            } else {
                '.'
            }
        })
        .collect()
}

/// Build the report for one pair or for every pair of the bundle's
/// families, with the `top_n` highest-gain features per section.
pub fn explain(
    bundle: &ModelBundle,
    pair: Option<(&str, &str)>,
    top_n: usize,
) -> Result<ExplainReport, ExplainError> {
    let known = || bundle.families.join(", ");
    let resolve = |name: &str| -> Result<usize, ExplainError> {
        bundle
            .families
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| ExplainError::UnknownFamily {
                name: name.to_string(),
                known: known(),
            })
    };

    let requested: Vec<(usize, usize)> = match pair {
        Some((a, b)) => {
            let (ia, ib) = (resolve(a)?, resolve(b)?);
            if ia == ib {
                return Err(ExplainError::DegeneratePair);
            }
            vec![(ia.min(ib), ia.max(ib))]
        }
        None => {
            let k = bundle.families.len();
            (0..k)
                .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
                .collect()
        }
    };

    let pair_sections: Vec<PairSection> = requested
        .iter()
        .map(|&(i, j)| {
            let key = (bundle.families[i].clone(), bundle.families[j].clone());
            let mut entries: Vec<FeatureLine> = bundle
                .features
                .iter()
                .flat_map(|f| {
                    f.tags
                        .iter()
                        .filter(|t| t.families == key)
                        .map(|t| FeatureLine {
                            hex: hex::encode(&f.gram),
                            ascii: ascii_render(&f.gram),
                            length: f.gram.len(),
                            entropy: f.entropy,
                            gain: t.gain,
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            entries.sort_by(|a, b| b.gain.total_cmp(&a.gain).then_with(|| a.hex.cmp(&b.hex)));
            entries.truncate(top_n);
            PairSection { pair: key, entries }
        })
        .collect();

    // families to report: the requested pair's two, or all
    let family_indices: Vec<usize> = match pair {
        Some(_) => {
            let (i, j) = requested[0];
            vec![i, j]
        }
        None => (0..bundle.families.len()).collect(),
    };
    let family_sections: Vec<FamilySection> = family_indices
        .into_iter()
        .map(|fi| {
            let name = &bundle.families[fi];
            let mut entries: Vec<FeatureLine> = bundle
                .features
                .iter()
                .filter_map(|f| {
                    let best = f
                        .tags
                        .iter()
                        .filter(|t| &t.families.0 == name || &t.families.1 == name)
                        .map(|t| t.gain)
                        .max_by(f64::total_cmp)?;
                    Some(FeatureLine {
                        hex: hex::encode(&f.gram),
                        ascii: ascii_render(&f.gram),
                        length: f.gram.len(),
                        entropy: f.entropy,
                        gain: best,
                    })
                })
                .collect();
            entries.sort_by(|a, b| b.gain.total_cmp(&a.gain).then_with(|| a.hex.cmp(&b.hex)));
            entries.truncate(top_n);
            FamilySection {
                family: name.clone(),
                entries,
            }
        })
        .collect();

    Ok(ExplainReport {
        pairs: pair_sections,
        families: family_sections,
    })
}

impl ExplainReport {
    /// Plain-text rendering for people.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for section in &self.pairs {
            let _ = writeln!(out, "== pair {} | {}", section.pair.0, section.pair.1);
            if section.entries.is_empty() {
                let _ = writeln!(out, "  (no surviving features tagged for this pair)");
            }
            for e in &section.entries {
                let _ = writeln!(
                    out,
                    "  gain {:.6}  len {:>3}  entropy {:.4}  {}  \"{}\"",
                    e.gain, e.length, e.entropy, e.hex, e.ascii
                );
            }
        }
        for section in &self.families {
            let _ = writeln!(out, "== family {}", section.family);
            if section.entries.is_empty() {
                let _ = writeln!(out, "  (no surviving features tagged for this family)");
            }
            for e in &section.entries {
                let _ = writeln!(
                    out,
                    "  gain {:.6}  len {:>3}  entropy {:.4}  {}  \"{}\"",
                    e.gain, e.length, e.entropy, e.hex, e.ascii
                );
            }
        }
        out
    }

    /// Machine-readable rendering: `# pair` / `# family` section headers
    /// over lines in the selector dump format.
    pub fn render_machine(&self, bundle: &ModelBundle) -> String {
        let mut out = String::new();
        for section in &self.pairs {
            let _ = writeln!(out, "# pair\t{}\t{}", section.pair.0, section.pair.1);
            out.push_str(&machine_lines(bundle, &section.entries));
        }
        for section in &self.families {
            let _ = writeln!(out, "# family\t{}", section.family);
            out.push_str(&machine_lines(bundle, &section.entries));
        }
        out
    }
}

fn machine_lines(bundle: &ModelBundle, entries: &[FeatureLine]) -> String {
    let mut out = String::new();
    for e in entries {
        if let Some(f) = bundle.features.iter().find(|f| hex::encode(&f.gram) == e.hex) {
            out.push_str(&dump_features(std::slice::from_ref(f)));
        }
    }
    out
}
