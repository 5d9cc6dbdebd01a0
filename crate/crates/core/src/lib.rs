//! Byte n-gram mining and explainable file-family classification.
//!
//! The library implements a five-stage pipeline over a labeled corpus of
//! raw byte files:
//!
//! 1. entropy thresholds — per-length entropy cutoffs from randomized
//!    corpus sampling,
//! 2. family representatives — per-family mining of high-entropy n-grams
//!    present in a significant fraction of the family's files,
//! 3. pairwise selection — information-gain scoring of representatives
//!    for every family pair, with per-pair budgets and tagging,
//! 4. feature vectors — multi-pattern matching of the selected grams
//!    plus raw one-gram histograms,
//! 5. model training — a randomized tree ensemble with importance
//!    pruning, retraining, and probability calibration.
//!
//! Trained models are packaged as self-contained on-disk bundles, and the
//! family-pair tags attached to every selected gram drive human-readable
//! explanation reports.

pub mod bundle;
pub mod corpus;
pub mod entropy;
pub mod explain;
pub mod featurizer;
pub mod forest;
pub mod metrics;
pub mod miner;
pub mod pipeline;
pub mod selector;
pub mod synth;
