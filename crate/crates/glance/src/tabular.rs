//! Dataset schema, ingestion, encoding, and the decile normalization that
//! defines the cost geometry.
//!
//! Numeric features are scaled so that one decile of the observed training
//! range costs one unit; categorical features are one-hot expanded. All types
//! are immutable after construction.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Per-feature description. Numeric ranges are observed from training rows;
/// `bin_width` is a tenth of the observed range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric {
        observed_min: f64,
        observed_max: f64,
        bin_width: f64,
    },
    Categorical {
        labels: Vec<String>,
    },
}

impl FeatureSchema {
    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, FeatureKind::Numeric { .. })
    }

    pub fn bin_width(&self) -> Option<f64> {
        match self.kind {
            FeatureKind::Numeric { bin_width, .. } => Some(bin_width),
            FeatureKind::Categorical { .. } => None,
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        match &self.kind {
            FeatureKind::Numeric { .. } => None,
            FeatureKind::Categorical { labels } => Some(labels),
        }
    }

    /// Width of this feature's block in the encoded vector.
    pub fn encoded_width(&self) -> usize {
        match &self.kind {
            FeatureKind::Numeric { .. } => 1,
            FeatureKind::Categorical { labels } => labels.len(),
        }
    }
}

/// Ordered collection of feature schemas; the shared geometry for encoding,
/// distances, and classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureSchema>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSchema>) -> Result<Self> {
        for f in &features {
            match &f.kind {
                FeatureKind::Numeric { bin_width, .. } => {
                    if !(*bin_width > 0.0) {
                        return Err(Error::Schema(format!(
                            "feature '{}' has non-positive bin width (constant feature?)",
                            f.name
                        )));
                    }
                }
                FeatureKind::Categorical { labels } => {
                    let mut seen = std::collections::BTreeSet::new();
                    for l in labels {
                        if !seen.insert(l) {
                            return Err(Error::Schema(format!(
                                "feature '{}' has duplicate category label '{}'",
                                f.name, l
                            )));
                        }
                    }
                    if labels.is_empty() {
                        return Err(Error::Schema(format!(
                            "categorical feature '{}' has no labels",
                            f.name
                        )));
                    }
                }
            }
        }
        Ok(Schema { features })
    }

    pub fn arity(&self) -> usize {
        self.features.len()
    }

    pub fn encoded_dim(&self) -> usize {
        self.features.iter().map(|f| f.encoded_width()).sum()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Offset of each feature's block in the encoded vector.
    pub fn encoded_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.features.len());
        let mut off = 0;
        for f in &self.features {
            offsets.push(off);
            off += f.encoded_width();
        }
        offsets
    }

    /// Checks that an instance conforms to this schema.
    pub fn validate_instance(&self, x: &Instance) -> Result<()> {
        if x.values.len() != self.features.len() {
            return Err(Error::Schema(format!(
                "instance arity {} does not match schema arity {}",
                x.values.len(),
                self.features.len()
            )));
        }
        for (f, v) in self.features.iter().zip(&x.values) {
            match (&f.kind, v) {
                (FeatureKind::Numeric { .. }, Value::Num(n)) => {
                    if !n.is_finite() {
                        return Err(Error::Schema(format!(
                            "non-finite value for numeric feature '{}'",
                            f.name
                        )));
                    }
                }
                (FeatureKind::Categorical { labels }, Value::Cat(c)) => {
                    if !labels.iter().any(|l| l == c) {
                        return Err(Error::Schema(format!(
                            "unknown category '{}' for feature '{}'",
                            c, f.name
                        )));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "value kind mismatch for feature '{}'",
                        f.name
                    )))
                }
            }
        }
        Ok(())
    }

    /// Encodes an instance: numerics divided by their bin width, categoricals
    /// one-hot expanded. Deterministic.
    pub fn encode(&self, x: &Instance) -> Result<Vec<f64>> {
        self.validate_instance(x)?;
        Ok(self.encode_unchecked(x))
    }

    /// Encoding without validation, for hot paths over already-validated rows.
    pub fn encode_unchecked(&self, x: &Instance) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.encoded_dim());
        for (f, v) in self.features.iter().zip(&x.values) {
            match (&f.kind, v) {
                (FeatureKind::Numeric { bin_width, .. }, Value::Num(n)) => {
                    out.push(n / bin_width);
                }
                (FeatureKind::Categorical { labels }, Value::Cat(c)) => {
                    for l in labels {
                        out.push(if l == c { 1.0 } else { 0.0 });
                    }
                }
                _ => unreachable!("validated instance"),
            }
        }
        out
    }

    /// Stable digest over feature names, kinds, and category labels.
    /// Numeric ranges are excluded so a digest identifies the feature layout,
    /// not a particular train split.
    pub fn digest(&self) -> String {
        let mut text = String::new();
        for f in &self.features {
            match &f.kind {
                FeatureKind::Numeric { .. } => {
                    let _ = write!(text, "{}:num;", f.name);
                }
                FeatureKind::Categorical { labels } => {
                    let _ = write!(text, "{}:cat[{}];", f.name, labels.join(","));
                }
            }
        }
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hex_digest(&hasher.finalize()[..16])
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Raw feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Num(_) => None,
            Value::Cat(c) => Some(c),
        }
    }
}

/// One row, in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub values: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
}

impl Instance {
    pub fn new(values: Vec<Value>) -> Self {
        Instance { values, id: None }
    }

    pub fn with_id(values: Vec<Value>, id: u64) -> Self {
        Instance {
            values,
            id: Some(id),
        }
    }
}

/// Typed tabular data with per-row labels in {-1, +1}.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: Schema,
    pub rows: Vec<Instance>,
    pub labels: Vec<i8>,
    /// Rows dropped at ingestion because of missing values.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn from_parts(schema: Schema, rows: Vec<Instance>, labels: Vec<i8>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("dataset has no rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Schema("row/label count mismatch".into()));
        }
        for x in &rows {
            schema.validate_instance(x)?;
        }
        if labels.iter().any(|&l| l != -1 && l != 1) {
            return Err(Error::NonBinaryLabel("labels must be -1 or +1".into()));
        }
        // rows keep a stable id so fold splits stay traceable to the source
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, mut x)| {
                if x.id.is_none() {
                    x.id = Some(i as u64);
                }
                x
            })
            .collect();
        Ok(Dataset {
            schema,
            rows,
            labels,
            dropped_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Fingerprint (row count + schema digest) embedded into reports.
    pub fn fingerprint(&self) -> String {
        format!("{}rows-{}", self.rows.len(), self.schema.digest())
    }
}

/// How missing values are handled at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop rows containing a missing value (counted).
    #[default]
    Drop,
    /// Replace missing numerics with the feature median; rows with missing
    /// categoricals are still dropped.
    MedianImpute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnknownCategoryPolicy {
    /// Unknown category values are an ingestion error.
    Reject,
    /// Category labels are collected from the data (plus any configured ones).
    #[default]
    Add,
}

/// Declared kind of a feature before ranges/labels are observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    Numeric { name: String },
    Categorical {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
}

impl FeatureSpec {
    pub fn name(&self) -> &str {
        match self {
            FeatureSpec::Numeric { name } => name,
            FeatureSpec::Categorical { name, .. } => name,
        }
    }
}

/// Ingestion configuration: declared features, label mapping, and policies.
/// The label mapping to {-1, +1} is always explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub features: Vec<FeatureSpec>,
    pub label_column: String,
    /// Raw label value mapped to +1 (favorable).
    pub positive_label: String,
    /// Raw label value mapped to -1 (unfavorable).
    pub negative_label: String,
    #[serde(default)]
    pub missing: MissingPolicy,
    #[serde(default)]
    pub unknown_category: UnknownCategoryPolicy,
}

/// Ingests a header-row CSV file.
pub fn ingest_csv(path: &Path, cfg: &SchemaConfig) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        records.push(rec.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    }
    build_dataset(&headers, records, cfg)
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "?" || t == "NA" || t == "NaN"
}

/// Builds a [`Dataset`] from raw string records. Used by CSV ingestion and
/// the dataset-specific loaders.
pub fn build_dataset(
    headers: &[String],
    records: Vec<Vec<String>>,
    cfg: &SchemaConfig,
) -> Result<Dataset> {
    let mut col_of = BTreeMap::new();
    for spec in &cfg.features {
        let idx = headers
            .iter()
            .position(|h| h == spec.name())
            .ok_or_else(|| Error::Schema(format!("column '{}' not in header", spec.name())))?;
        col_of.insert(spec.name().to_string(), idx);
    }
    let label_idx = headers
        .iter()
        .position(|h| h == &cfg.label_column)
        .ok_or_else(|| Error::Schema(format!("label column '{}' not in header", cfg.label_column)))?;

    // First pass: reject malformed rows, collect labels seen, track missing.
    let mut kept: Vec<(usize, Vec<String>, i8)> = Vec::new();
    let mut dropped = 0usize;
    let mut distinct_labels = std::collections::BTreeSet::new();
    for (rownum, rec) in records.into_iter().enumerate() {
        if rec.len() != headers.len() {
            return Err(Error::Ingest {
                row: rownum + 1,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let raw_label = rec[label_idx].trim().to_string();
        distinct_labels.insert(raw_label.clone());
        let label = if raw_label == cfg.positive_label {
            1
        } else if raw_label == cfg.negative_label {
            -1
        } else {
            0 // resolved below once we know whether the column is binary
        };
        let mut cells = Vec::with_capacity(cfg.features.len());
        let mut missing = false;
        let mut missing_categorical = false;
        for spec in &cfg.features {
            let cell = rec[col_of[spec.name()]].trim().to_string();
            if is_missing(&cell) {
                missing = true;
                if matches!(spec, FeatureSpec::Categorical { .. }) {
                    missing_categorical = true;
                }
            }
            cells.push(cell);
        }
        if missing && (cfg.missing == MissingPolicy::Drop || missing_categorical) {
            dropped += 1;
            continue;
        }
        kept.push((rownum + 1, cells, label));
    }
    if distinct_labels.len() > 2 {
        return Err(Error::NonBinaryLabel(format!(
            "label column has {} distinct values: {:?}",
            distinct_labels.len(),
            distinct_labels
        )));
    }
    for l in &distinct_labels {
        if l != &cfg.positive_label && l != &cfg.negative_label {
            return Err(Error::NonBinaryLabel(format!(
                "label value '{}' is not mapped by the config",
                l
            )));
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyInput("no rows survived ingestion".into()));
    }

    // Median imputation for numerics, if configured.
    if cfg.missing == MissingPolicy::MedianImpute {
        for (fi, spec) in cfg.features.iter().enumerate() {
            if !matches!(spec, FeatureSpec::Numeric { .. }) {
                continue;
            }
            let mut present: Vec<f64> = Vec::new();
            for (row, cells, _) in &kept {
                if !is_missing(&cells[fi]) {
                    let v: f64 = cells[fi].parse().map_err(|_| Error::Ingest {
                        row: *row,
                        message: format!("invalid numeric '{}' for '{}'", cells[fi], spec.name()),
                    })?;
                    present.push(v);
                }
            }
            if present.is_empty() {
                return Err(Error::Schema(format!(
                    "feature '{}' has no observed values",
                    spec.name()
                )));
            }
            present.sort_by(|a, b| a.total_cmp(b));
            let median = present[present.len() / 2];
            for (_, cells, _) in &mut kept {
                if is_missing(&cells[fi]) {
                    cells[fi] = median.to_string();
                }
            }
        }
    }

    // Second pass: parse values and collect ranges / labels.
    let mut rows: Vec<Instance> = Vec::with_capacity(kept.len());
    let mut labels: Vec<i8> = Vec::with_capacity(kept.len());
    let mut observed_cats: Vec<std::collections::BTreeSet<String>> =
        vec![Default::default(); cfg.features.len()];
    for (row_id, (rownum, cells, label)) in kept.iter().enumerate() {
        let mut values = Vec::with_capacity(cells.len());
        for (fi, spec) in cfg.features.iter().enumerate() {
            match spec {
                FeatureSpec::Numeric { name } => {
                    let v: f64 = cells[fi].parse().map_err(|_| Error::Ingest {
                        row: *rownum,
                        message: format!("invalid numeric '{}' for '{}'", cells[fi], name),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Ingest {
                            row: *rownum,
                            message: format!("non-finite numeric for '{}'", name),
                        });
                    }
                    values.push(Value::Num(v));
                }
                FeatureSpec::Categorical { name, labels: declared } => {
                    let cell = cells[fi].clone();
                    if let Some(declared) = declared {
                        if !declared.contains(&cell)
                            && cfg.unknown_category == UnknownCategoryPolicy::Reject
                        {
                            return Err(Error::Ingest {
                                row: *rownum,
                                message: format!("unknown category '{}' for '{}'", cell, name),
                            });
                        }
                    }
                    observed_cats[fi].insert(cell.clone());
                    values.push(Value::Cat(cell));
                }
            }
        }
        rows.push(Instance::with_id(values, row_id as u64));
        labels.push(*label);
    }

    // Schema from observed data.
    let mut features = Vec::with_capacity(cfg.features.len());
    for (fi, spec) in cfg.features.iter().enumerate() {
        match spec {
            FeatureSpec::Numeric { name } => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for x in &rows {
                    let v = x.values[fi].as_num().unwrap();
                    min = min.min(v);
                    max = max.max(v);
                }
                let bin_width = (max - min) / 10.0;
                if !(bin_width > 0.0) {
                    return Err(Error::Schema(format!(
                        "numeric feature '{}' is constant over the ingested rows",
                        name
                    )));
                }
                features.push(FeatureSchema {
                    name: name.clone(),
                    kind: FeatureKind::Numeric {
                        observed_min: min,
                        observed_max: max,
                        bin_width,
                    },
                });
            }
            FeatureSpec::Categorical { name, labels: declared } => {
                let mut labels: Vec<String> = declared.clone().unwrap_or_default();
                for c in &observed_cats[fi] {
                    if !labels.contains(c) {
                        labels.push(c.clone());
                    }
                }
                features.push(FeatureSchema {
                    name: name.clone(),
                    kind: FeatureKind::Categorical { labels },
                });
            }
        }
    }

    let schema = Schema::new(features)?;
    let mut ds = Dataset::from_parts(schema, rows, labels)?;
    ds.dropped_rows = dropped;
    Ok(ds)
}

/// Recomputes numeric ranges (and bin widths) of `schema` from the given rows.
/// Category label sets are kept as-is so held-out rows still conform.
pub fn refit_ranges(schema: &Schema, rows: &[Instance]) -> Result<Schema> {
    let mut features = schema.features.clone();
    for (fi, f) in features.iter_mut().enumerate() {
        if let FeatureKind::Numeric { .. } = f.kind {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for x in rows {
                let v = x.values[fi].as_num().ok_or_else(|| {
                    Error::Schema(format!("non-numeric value for feature '{}'", f.name))
                })?;
                min = min.min(v);
                max = max.max(v);
            }
            let bin_width = (max - min) / 10.0;
            if !(bin_width > 0.0) {
                return Err(Error::Schema(format!(
                    "numeric feature '{}' is constant over the training split",
                    f.name
                )));
            }
            f.kind = FeatureKind::Numeric {
                observed_min: min,
                observed_max: max,
                bin_width,
            };
        }
    }
    Schema::new(features)
}

/// Deterministic k-fold split. The shuffle is a pure function of `seed`;
/// schema ranges are recomputed from each train split only.
pub fn split_kfold(dataset: &Dataset, folds: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    if folds < 2 {
        return Err(Error::Config("folds must be >= 2".into()));
    }
    if folds > dataset.len() {
        return Err(Error::Config(format!(
            "folds ({}) exceed row count ({})",
            folds,
            dataset.len()
        )));
    }
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let mut out = Vec::with_capacity(folds);
    let n = indices.len();
    for f in 0..folds {
        let lo = f * n / folds;
        let hi = (f + 1) * n / folds;
        let test_idx = &indices[lo..hi];
        let test_set: std::collections::BTreeSet<usize> = test_idx.iter().copied().collect();
        let mut train_rows = Vec::with_capacity(n - test_idx.len());
        let mut train_labels = Vec::with_capacity(n - test_idx.len());
        let mut test_rows = Vec::with_capacity(test_idx.len());
        let mut test_labels = Vec::with_capacity(test_idx.len());
        for i in 0..n {
            if test_set.contains(&i) {
                test_rows.push(dataset.rows[i].clone());
                test_labels.push(dataset.labels[i]);
            } else {
                train_rows.push(dataset.rows[i].clone());
                train_labels.push(dataset.labels[i]);
            }
        }
        let schema = refit_ranges(&dataset.schema, &train_rows)?;
        let train = Dataset::from_parts(schema.clone(), train_rows, train_labels)?;
        let test = Dataset::from_parts(schema, test_rows, test_labels)?;
        out.push((train, test));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn two_numeric_config() -> SchemaConfig {
        SchemaConfig {
            features: vec![
                FeatureSpec::Numeric { name: "a".into() },
                FeatureSpec::Numeric { name: "b".into() },
            ],
            label_column: "y".into(),
            positive_label: "1".into(),
            negative_label: "0".into(),
            missing: MissingPolicy::Drop,
            unknown_category: UnknownCategoryPolicy::Add,
        }
    }

    #[test]
    fn ingest_computes_decile_bin_widths() {
        let f = write_csv("a,b,y\n0,0,1\n50,100,0\n100,50,1\n");
        let ds = ingest_csv(f.path(), &two_numeric_config()).unwrap();
        assert_eq!(ds.len(), 3);
        for feat in &ds.schema.features {
            assert_eq!(feat.bin_width(), Some(10.0));
        }
    }

    #[test]
    fn ingest_rejects_non_binary_label() {
        let f = write_csv("a,b,y\n0,0,1\n50,100,0\n100,50,2\n");
        let err = ingest_csv(f.path(), &two_numeric_config()).unwrap_err();
        assert!(matches!(err, Error::NonBinaryLabel(_)), "{err}");
    }

    #[test]
    fn ingest_rejects_constant_numeric_feature() {
        let f = write_csv("a,b,y\n5,0,1\n5,100,0\n");
        let err = ingest_csv(f.path(), &two_numeric_config()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn ingest_reports_malformed_row_number() {
        let f = write_csv("a,b,y\n0,0,1\nnope,100,0\n");
        let err = ingest_csv(f.path(), &two_numeric_config()).unwrap_err();
        match err {
            Error::Ingest { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn ingest_drops_and_counts_missing_rows() {
        let f = write_csv("a,b,y\n0,0,1\n,100,0\n100,50,0\n");
        let ds = ingest_csv(f.path(), &two_numeric_config()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dropped_rows, 1);
    }

    #[test]
    fn ingest_rejects_unknown_category_when_configured() {
        let cfg = SchemaConfig {
            features: vec![
                FeatureSpec::Numeric { name: "a".into() },
                FeatureSpec::Categorical {
                    name: "c".into(),
                    labels: Some(vec!["x".into(), "y".into()]),
                },
            ],
            label_column: "y".into(),
            positive_label: "1".into(),
            negative_label: "0".into(),
            missing: MissingPolicy::Drop,
            unknown_category: UnknownCategoryPolicy::Reject,
        };
        let f = write_csv("a,c,y\n0,x,1\n1,z,0\n");
        assert!(ingest_csv(f.path(), &cfg).is_err());
    }

    fn toy_schema() -> Schema {
        Schema::new(vec![
            FeatureSchema {
                name: "num".into(),
                kind: FeatureKind::Numeric {
                    observed_min: 0.0,
                    observed_max: 100.0,
                    bin_width: 10.0,
                },
            },
            FeatureSchema {
                name: "cat".into(),
                kind: FeatureKind::Categorical {
                    labels: vec!["A".into(), "B".into(), "C".into()],
                },
            },
        ])
        .unwrap()
    }

    #[test]
    fn encode_scales_and_one_hots() {
        let schema = toy_schema();
        let x = Instance::new(vec![Value::Num(25.0), Value::Cat("B".into())]);
        assert_eq!(schema.encode(&x).unwrap(), vec![2.5, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn encode_min_of_range() {
        let schema = Schema::new(vec![
            FeatureSchema {
                name: "num".into(),
                kind: FeatureKind::Numeric {
                    observed_min: 0.0,
                    observed_max: 10.0,
                    bin_width: 1.0,
                },
            },
            FeatureSchema {
                name: "cat".into(),
                kind: FeatureKind::Categorical {
                    labels: vec!["A".into(), "B".into()],
                },
            },
        ])
        .unwrap();
        let x = Instance::new(vec![Value::Num(0.0), Value::Cat("A".into())]);
        assert_eq!(schema.encode(&x).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    fn toy_dataset(n: usize) -> Dataset {
        let schema = toy_schema();
        let rows: Vec<Instance> = (0..n)
            .map(|i| {
                Instance::new(vec![
                    Value::Num(i as f64 * 100.0 / (n.max(2) - 1) as f64),
                    Value::Cat(if i % 2 == 0 { "A".into() } else { "B".into() }),
                ])
            })
            .collect();
        let labels = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        Dataset::from_parts(schema, rows, labels).unwrap()
    }

    #[test]
    fn kfold_is_a_disjoint_exhaustive_partition() {
        let ds = toy_dataset(10);
        let folds = split_kfold(&ds, 5, 7).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = std::collections::BTreeSet::new();
        for (_, test) in &folds {
            assert_eq!(test.len(), 2);
            for x in &test.rows {
                // instances carry their original ids
                assert!(seen.insert(x.id.unwrap()), "fold overlap");
            }
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn kfold_is_deterministic() {
        let ds = toy_dataset(10);
        let a = split_kfold(&ds, 5, 42).unwrap();
        let b = split_kfold(&ds, 5, 42).unwrap();
        for ((_, ta), (_, tb)) in a.iter().zip(&b) {
            assert_eq!(ta.rows, tb.rows);
        }
    }

    #[test]
    fn kfold_rejects_more_folds_than_rows() {
        let ds = toy_dataset(3);
        assert!(split_kfold(&ds, 4, 0).is_err());
    }

    #[test]
    fn kfold_refits_ranges_from_train_only() {
        let ds = toy_dataset(10);
        for (train, test) in split_kfold(&ds, 5, 1).unwrap() {
            let mut max = f64::NEG_INFINITY;
            for x in &train.rows {
                max = max.max(x.values[0].as_num().unwrap());
            }
            match train.schema.features[0].kind {
                FeatureKind::Numeric { observed_max, .. } => assert_eq!(observed_max, max),
                _ => unreachable!(),
            }
            assert_eq!(train.schema, test.schema);
        }
    }

    #[test]
    fn encode_roundtrips_numerics() {
        let schema = toy_schema();
        let x = Instance::new(vec![Value::Num(37.5), Value::Cat("C".into())]);
        let z = schema.encode(&x).unwrap();
        let recovered = z[0] * 10.0;
        assert!((recovered - 37.5).abs() <= 1e-9 * 37.5);
    }
}
