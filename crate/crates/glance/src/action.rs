//! Actions: sparse sets of feature changes, their application, cost, and the
//! vector embedding used for averaging and action-space distances.
//!
//! Numeric changes are additive deltas in raw units so the same action can be
//! applied to many distinct instances; categorical changes set the feature to
//! a target label. Cost is L1 in decile-normalized units for numerics and
//! Hamming (between `x` and `a(x)`) for categoricals, so a set-to-value that
//! matches the current value costs nothing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tabular::{FeatureKind, Instance, Schema, Value};
use crate::{Error, Result};

/// A single feature change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Change {
    #[serde(rename = "delta")]
    NumericDelta(f64),
    #[serde(rename = "set")]
    CategoricalSet(String),
}

/// A sparse set of feature changes; the unit of explanation. The changes map
/// is ordered by feature name, which doubles as the canonical rendering used
/// for deduplication and tie-breaking.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action {
    changes: BTreeMap<String, Change>,
}

impl Action {
    pub fn new() -> Self {
        Action::default()
    }

    pub fn with(mut self, feature: impl Into<String>, change: Change) -> Self {
        self.changes.insert(feature.into(), change);
        self
    }

    pub fn set(&mut self, feature: impl Into<String>, change: Change) {
        self.changes.insert(feature.into(), change);
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.changes.len()
    }

    pub fn changes(&self) -> impl Iterator<Item = (&str, &Change)> {
        self.changes.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn get(&self, feature: &str) -> Option<&Change> {
        self.changes.get(feature)
    }

    /// Canonical sorted rendering; the dedup / ordering key.
    pub fn canonical_key(&self) -> String {
        let mut out = String::new();
        for (name, change) in &self.changes {
            match change {
                Change::NumericDelta(d) => {
                    out.push_str(&format!("{name}+={d};"));
                }
                Change::CategoricalSet(t) => {
                    out.push_str(&format!("{name}:={t};"));
                }
            }
        }
        out
    }

    /// Checks kind compatibility and target-label validity against a schema.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for (name, change) in &self.changes {
            let idx = schema
                .feature_index(name)
                .ok_or_else(|| Error::Schema(format!("action targets unknown feature '{name}'")))?;
            match (&schema.features[idx].kind, change) {
                (FeatureKind::Numeric { .. }, Change::NumericDelta(d)) => {
                    if !d.is_finite() {
                        return Err(Error::Schema(format!("non-finite delta on '{name}'")));
                    }
                }
                (FeatureKind::Categorical { labels }, Change::CategoricalSet(t)) => {
                    if !labels.iter().any(|l| l == t) {
                        return Err(Error::Schema(format!(
                            "action sets '{name}' to unknown label '{t}'"
                        )));
                    }
                }
                (FeatureKind::Numeric { .. }, Change::CategoricalSet(_)) => {
                    return Err(Error::Schema(format!(
                        "categorical change on numeric feature '{name}'"
                    )));
                }
                (FeatureKind::Categorical { .. }, Change::NumericDelta(_)) => {
                    return Err(Error::Schema(format!(
                        "numeric delta on categorical feature '{name}'"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Applies the action, returning the counterfactual instance. `x` is left
    /// untouched; features without a change are copied as-is.
    pub fn apply(&self, x: &Instance, schema: &Schema) -> Instance {
        let mut values = x.values.clone();
        for (name, change) in &self.changes {
            let idx = schema
                .feature_index(name)
                .expect("validated action targets known features");
            match (change, &mut values[idx]) {
                (Change::NumericDelta(d), Value::Num(v)) => *v += d,
                (Change::CategoricalSet(t), Value::Cat(c)) => *c = t.clone(),
                _ => panic!("action kind mismatch; validate() first"),
            }
        }
        Instance {
            values,
            id: x.id,
        }
    }

    /// Recourse cost of applying this action to `x`: |delta| per bin width on
    /// numerics, plus 1 per categorical feature where `a(x)` differs from `x`.
    pub fn cost(&self, x: &Instance, schema: &Schema) -> f64 {
        let mut total = 0.0;
        for (name, change) in &self.changes {
            let idx = schema
                .feature_index(name)
                .expect("validated action targets known features");
            match (change, &x.values[idx], &schema.features[idx].kind) {
                (Change::NumericDelta(d), Value::Num(_), FeatureKind::Numeric { bin_width, .. }) => {
                    total += d.abs() / bin_width;
                }
                (Change::CategoricalSet(t), Value::Cat(c), FeatureKind::Categorical { .. }) => {
                    if t != c {
                        total += 1.0;
                    }
                }
                _ => panic!("action kind mismatch; validate() first"),
            }
        }
        total
    }

    /// Embeds the action into the encoded-point geometry: numeric coordinates
    /// are delta over bin width, categorical blocks one-hot the target label
    /// (all zero when the feature is unchanged).
    pub fn to_action_vector(&self, schema: &Schema) -> Vec<f64> {
        let mut out = vec![0.0; schema.encoded_dim()];
        let offsets = schema.encoded_offsets();
        for (name, change) in &self.changes {
            let idx = schema
                .feature_index(name)
                .expect("validated action targets known features");
            match (change, &schema.features[idx].kind) {
                (Change::NumericDelta(d), FeatureKind::Numeric { bin_width, .. }) => {
                    out[offsets[idx]] = d / bin_width;
                }
                (Change::CategoricalSet(t), FeatureKind::Categorical { labels }) => {
                    let pos = labels.iter().position(|l| l == t).expect("validated label");
                    out[offsets[idx] + pos] = 1.0;
                }
                _ => panic!("action kind mismatch; validate() first"),
            }
        }
        out
    }
}

/// Coordinate-wise mean of the action vectors; the representative of a
/// cluster's candidate set in action space.
pub fn mean_action_vector(actions: &[Action], schema: &Schema) -> Result<Vec<f64>> {
    if actions.is_empty() {
        return Err(Error::EmptyInput("mean of empty action sequence".into()));
    }
    let mut mean = vec![0.0; schema.encoded_dim()];
    for a in actions {
        for (m, v) in mean.iter_mut().zip(a.to_action_vector(schema)) {
            *m += v;
        }
    }
    let n = actions.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}

/// Removes duplicate actions (canonical-key equality), keeping first
/// occurrences in order.
pub fn dedup_actions(actions: Vec<Action>) -> Vec<Action> {
    let mut seen = std::collections::BTreeSet::new();
    actions
        .into_iter()
        .filter(|a| seen.insert(a.canonical_key()))
        .collect()
}
