//! The black-box binary classifier contract, plus two self-contained
//! trainable models so the pipeline runs end-to-end without external ML
//! systems.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::tabular::{Dataset, Instance, Schema};
use crate::{Error, Result};

/// Black-box binary predictor over encoded points. Implementations must be
/// deterministic and total over well-formed encoded points.
pub trait Classifier: Send + Sync {
    /// Returns -1 (unfavorable) or +1 (favorable).
    fn predict_encoded(&self, z: &[f64]) -> i8;

    fn descriptor(&self) -> String;

    fn predict_batch(&self, zs: &[Vec<f64>]) -> Vec<i8> {
        zs.iter().map(|z| self.predict_encoded(z)).collect()
    }
}

/// Predicts on a raw instance by encoding it first.
pub fn predict(model: &dyn Classifier, x: &Instance, schema: &Schema) -> i8 {
    model.predict_encoded(&schema.encode_unchecked(x))
}

/// Exactly the instances predicted -1, in dataset order.
pub fn affected_set(model: &dyn Classifier, data: &Dataset) -> Vec<Instance> {
    data.rows
        .iter()
        .filter(|x| predict(model, x, &data.schema) == -1)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    pub train_accuracy: f64,
}

/// Linear model with decision rule sign(w . z + b); ties at exactly zero go
/// to the negative class, so ambiguous individuals stay "affected".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub meta: TrainingMeta,
}

impl Classifier for LogisticModel {
    fn predict_encoded(&self, z: &[f64]) -> i8 {
        let score: f64 = self
            .weights
            .iter()
            .zip(z)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.bias;
        if score > 0.0 {
            1
        } else {
            -1
        }
    }

    fn descriptor(&self) -> String {
        format!(
            "logistic(dim={}, lr={}, iters={}, seed={})",
            self.weights.len(),
            self.meta.learning_rate,
            self.meta.iterations,
            self.meta.seed
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogisticHyper {
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        LogisticHyper {
            learning_rate: 0.5,
            iterations: 500,
            seed: 13,
        }
    }
}

/// Full-batch gradient descent on the logistic loss over encoded points.
/// Deterministic given the hyperparameters (zero init; the seed is recorded
/// for provenance).
pub fn train_logistic(train: &Dataset, hyper: LogisticHyper) -> Result<LogisticModel> {
    let pos = train.labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == train.labels.len() {
        return Err(Error::Config(
            "training data contains a single class".into(),
        ));
    }
    let encoded: Vec<Vec<f64>> = train
        .rows
        .iter()
        .map(|x| train.schema.encode_unchecked(x))
        .collect();
    let dim = train.schema.encoded_dim();
    let n = encoded.len() as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for _ in 0..hyper.iterations {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        for (z, &y) in encoded.iter().zip(&train.labels) {
            let y = y as f64;
            let margin: f64 = w.iter().zip(z).map(|(wi, zi)| wi * zi).sum::<f64>() + b;
            // d/dw of ln(1 + exp(-y * margin))
            let coeff = -y * sigmoid(-y * margin);
            for (g, zi) in gw.iter_mut().zip(z) {
                *g += coeff * zi;
            }
            gb += coeff;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= hyper.learning_rate * g / n;
        }
        b -= hyper.learning_rate * gb / n;
    }
    let mut model = LogisticModel {
        weights: w,
        bias: b,
        meta: TrainingMeta {
            learning_rate: hyper.learning_rate,
            iterations: hyper.iterations,
            seed: hyper.seed,
            train_accuracy: 0.0,
        },
    };
    let correct = encoded
        .iter()
        .zip(&train.labels)
        .filter(|(z, &y)| model.predict_encoded(z) == y)
        .count();
    model.meta.train_accuracy = correct as f64 / n;
    Ok(model)
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Memorizing nearest-neighbor model with L1 distance in encoded space.
/// The neighbor count must be odd so the majority vote is always strict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
    pub k_nn: usize,
}

impl KnnModel {
    pub fn fit(train: &Dataset, k_nn: usize) -> Result<Self> {
        if k_nn % 2 == 0 {
            return Err(Error::Config("k_nn must be odd".into()));
        }
        if k_nn > train.len() {
            return Err(Error::Config("k_nn exceeds training size".into()));
        }
        Ok(KnnModel {
            points: train
                .rows
                .iter()
                .map(|x| train.schema.encode_unchecked(x))
                .collect(),
            labels: train.labels.clone(),
            k_nn,
        })
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

impl Classifier for KnnModel {
    fn predict_encoded(&self, z: &[f64]) -> i8 {
        let mut dists: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (l1(p, z), i))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let vote: i32 = dists
            .iter()
            .take(self.k_nn)
            .map(|&(_, i)| self.labels[i] as i32)
            .sum();
        if vote > 0 {
            1
        } else {
            -1
        }
    }

    fn descriptor(&self) -> String {
        format!("knn(k={}, n={})", self.k_nn, self.points.len())
    }
}

/// Wrapper counting prediction calls; used to check the model-query budget.
pub struct CountingClassifier<C: Classifier> {
    inner: C,
    calls: AtomicU64,
}

impl<C: Classifier> CountingClassifier<C> {
    pub fn new(inner: C) -> Self {
        CountingClassifier {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl<C: Classifier> Classifier for CountingClassifier<C> {
    fn predict_encoded(&self, z: &[f64]) -> i8 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.predict_encoded(z)
    }

    fn descriptor(&self) -> String {
        format!("counting({})", self.inner.descriptor())
    }
}

/// Serializable model artifact so folds can be re-evaluated without
/// retraining. The schema digest ties the artifact to its feature layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_digest: String,
    pub model: SavedModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Logistic(LogisticModel),
    Knn(KnnModel),
}

impl SavedModel {
    pub fn classifier(&self) -> &dyn Classifier {
        match self {
            SavedModel::Logistic(m) => m,
            SavedModel::Knn(m) => m,
        }
    }
}

impl ModelArtifact {
    pub fn new(schema: &Schema, model: SavedModel) -> Self {
        ModelArtifact {
            schema_digest: schema.digest(),
            model,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        serde_json::from_str(&json).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn classifier(&self) -> &dyn Classifier {
        self.model.classifier()
    }

    /// Checks the artifact against a schema before use.
    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        if self.schema_digest != schema.digest() {
            return Err(Error::Config(
                "model artifact schema digest does not match the dataset".into(),
            ));
        }
        Ok(())
    }
}
