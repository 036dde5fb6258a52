//! Run configuration: a single TOML file describing the dataset, the model,
//! the engine parameters, and the evaluation protocol. Flags only override
//! config keys; a run is fully reproducible from the archived config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{train_logistic, KnnModel, LogisticHyper, SavedModel};
use crate::datasets;
use crate::engine::{GlanceConfig, SelectionScope, SelectionStrategy};
use crate::generation::{GeneratorConfig, GeneratorKind};
use crate::tabular::{ingest_csv, Dataset, SchemaConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// Header-row CSV described by an inline schema.
    Csv,
    /// Statlog attribute file (whitespace-separated, 1/2 risk label).
    GermanCredit,
    /// Two-year recidivism scores CSV with the standard quality filters.
    Compas,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: DatasetFormat,
    /// Required for the csv format, ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<SchemaConfig>,
    /// Human-readable name used in reports; defaults to the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl DatasetConfig {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn load(&self) -> Result<Dataset> {
        match self.format {
            DatasetFormat::Csv => {
                let schema = self.schema.as_ref().ok_or_else(|| {
                    Error::Config("csv format requires an inline [dataset.schema]".into())
                })?;
                ingest_csv(&self.path, schema)
            }
            DatasetFormat::GermanCredit => datasets::load_german_credit(&self.path),
            DatasetFormat::Compas => datasets::load_compas(&self.path),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Logistic {
        #[serde(flatten)]
        hyper: LogisticHyper,
    },
    Knn {
        k_nn: usize,
    },
}

impl ModelConfig {
    pub fn fit(&self, train: &Dataset) -> Result<SavedModel> {
        match self {
            ModelConfig::Logistic { hyper } => {
                Ok(SavedModel::Logistic(train_logistic(train, hyper.clone())?))
            }
            ModelConfig::Knn { k_nn } => Ok(SavedModel::Knn(KnnModel::fit(train, *k_nn)?)),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelConfig::Logistic { .. } => "logistic",
            ModelConfig::Knn { .. } => "knn",
        }
    }
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub glance: GlanceConfig,
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub output_dir: PathBuf,
    /// Optional explicit cost grid for the effectiveness-cost curve; the
    /// observed recourse costs are used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_grid: Option<Vec<f64>>,
    /// Optional gate: the run exits nonzero when aggregated effectiveness
    /// (percent) falls below this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_effectiveness: Option<f64>,
}

impl RunConfig {
    /// Structural validation plus, optionally, filesystem checks.
    pub fn validate(&self, check_paths: bool) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        self.glance.validate()?;
        if self.dataset.format == DatasetFormat::Csv && self.dataset.schema.is_none() {
            return Err(Error::Config(
                "csv format requires an inline [dataset.schema]".into(),
            ));
        }
        if let Some(grid) = &self.curve_grid {
            if grid.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Config("curve_grid must be sorted ascending".into()));
            }
        }
        if let Some(m) = self.min_effectiveness {
            if !(0.0..=100.0).contains(&m) {
                return Err(Error::Config(
                    "min_effectiveness is a percentage in [0, 100]".into(),
                ));
            }
        }
        if check_paths && !self.dataset.path.exists() {
            return Err(Error::Config(format!(
                "dataset file not found: {}",
                self.dataset.path.display()
            )));
        }
        Ok(())
    }

    /// Digest over the canonical serialization; reports with equal digests
    /// have byte-equal result bodies.
    pub fn digest(&self) -> String {
        let canonical =
            serde_json::to_string(self).expect("config serialization is infallible");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        format!("{:x}", hasher.finalize())
    }
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate(false)?;
    Ok(cfg)
}

/// Engine defaults: s=4 final actions from k=100 initial clusters (30 for
/// datasets of at most 1200 rows), 10 candidates per centroid via the scaled
/// nearest-neighbor generator, seed 13.
pub fn default_glance_config(dataset_rows: usize) -> GlanceConfig {
    let k = if dataset_rows <= 1200 { 30 } else { 100 };
    GlanceConfig {
        s: 4,
        k,
        generator: GeneratorConfig {
            kind: GeneratorKind::NearestNeighborsScaled,
            m: 10,
            k_f: 3,
            k_c: 10,
            line_samples: 20,
            seed: 13,
        },
        selection: SelectionStrategy::MaxEffectiveness,
        selection_scope: SelectionScope::Cluster,
        seed: 13,
    }
}
