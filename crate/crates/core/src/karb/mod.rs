//! Weighted rule-set qualifiers fitted to labeled tabular data.
//!
//! Records become `Has(feature, value)` facts, the qualifier's `[signal]`
//! rules fire on them, and a record's score is the weighted count of
//! signal firings. Weights and threshold are fitted by seeded hill
//! climbing against binarized gold labels.

mod data;
mod fit;
mod qualifier;
mod synth;

pub use data::{encode_record, ingest_csv, sanitize, Record, Schema, Value};
pub use fit::{evaluate, fit, fitness, FitConfig, FitReport, Metrics, Objective, RestartReport};
pub use qualifier::{Binarization, Qualifier, SIGNAL_GROUP};
pub use synth::{generate_synthetic, Domain, SyntheticConfig, SyntheticData};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KarbError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("duplicate column `{0}`")]
    DuplicateHeader(String),
    #[error("missing label column `{0}`")]
    MissingLabelColumn(String),
    #[error("line {line}: label `{value}` is not an integer")]
    BadLabel { line: u64, value: String },
    #[error("record {0} has no label")]
    Unlabeled(String),
    #[error("empty feature name")]
    EmptyFeatureName,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("the program has no rules in the `{SIGNAL_GROUP}` group")]
    NoSignalRules,
    #[error("weight for unknown signal rule `{0}`")]
    UnknownRule(String),
    #[error("qualifier was fitted to different rules (digest {expected}, rules hash to {actual})")]
    DigestMismatch { expected: String, actual: String },
    #[error("invalid binarization `{0}`; expected `label = N` or `label >= N`")]
    BadBinarization(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("qualifier json: {0}")]
    Json(String),
}
