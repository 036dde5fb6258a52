//! Small, interpretable sets of global counterfactual actions for black-box
//! tabular classifiers.
//!
//! The pipeline: ingest a tabular dataset, train (or wrap) a binary
//! classifier, collect the adversely affected instances, and compute at most
//! `s` global actions via an agglomerative procedure that clusters jointly in
//! feature space and action space. Solutions are scored by effectiveness
//! (fraction of affected instances flipped), average recourse cost, and size,
//! with Pareto-dominance comparison and robustness flagging across folds.

pub mod action;
pub mod classifier;
pub mod clustering;
pub mod config;
pub mod datasets;
pub mod engine;
pub mod generation;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod tabular;

pub use action::{Action, Change};
pub use classifier::{Classifier, KnnModel, LogisticModel};
pub use engine::{glance, GceSolution, GlanceConfig, SelectionStrategy};
pub use tabular::{Dataset, FeatureKind, FeatureSchema, Instance, Schema, Value};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("ingestion error at row {row}: {message}")]
    Ingest { row: usize, message: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("non-binary label: {0}")]
    NonBinaryLabel(String),
    #[error("no unaffected population: every training instance is predicted negative")]
    NoUnaffected,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("enumeration budget exceeded: {0} subsets")]
    BudgetExceeded(u128),
    #[error("records not comparable: {0}")]
    Incomparable(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;
