//! Candidate counterfactual action generators: random feature perturbation,
//! nearest unaffected neighbors, and a line-search variant of the latter.
//! All generators are deterministic functions of their inputs and seed, and
//! every returned action flips the centroid it was generated for.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{dedup_actions, Action, Change};
use crate::classifier::Classifier;
use crate::tabular::{Dataset, FeatureKind, Instance, Schema, Value};
use crate::{Error, Result};

/// Proposal budget multiplier for random sampling: at most `m * 50` candidate
/// instances are evaluated before giving up on finding `m` valid actions.
pub const RANDOM_SAMPLING_BUDGET_PER_ACTION: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    RandomSampling,
    NearestNeighbors,
    NearestNeighborsScaled,
    /// Every cluster draws from this explicit pool; used to compare the
    /// engine against the reference solvers on a shared action space.
    FixedPool(Vec<Action>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    /// Candidates to generate per centroid.
    pub m: usize,
    /// Top important features considered by random sampling.
    #[serde(default = "default_k_f")]
    pub k_f: usize,
    /// Top frequent categories (among unaffected individuals) considered as
    /// replacement values.
    #[serde(default = "default_k_c")]
    pub k_c: usize,
    /// Samples along the centroid-neighbor segment for the scaled search.
    #[serde(default = "default_line_samples")]
    pub line_samples: usize,
    pub seed: u64,
}

fn default_k_f() -> usize {
    3
}
fn default_k_c() -> usize {
    10
}
fn default_line_samples() -> usize {
    20
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::Config("generator m must be >= 1".into()));
        }
        if self.k_f < 1 || self.k_c < 1 {
            return Err(Error::Config("k_f and k_c must be >= 1".into()));
        }
        if self.line_samples < 2 {
            return Err(Error::Config("line_samples must be >= 2".into()));
        }
        Ok(())
    }
}

/// Per-feature permutation importance: the fraction of predictions that
/// change when the feature's column is permuted (one seeded permutation per
/// feature).
#[derive(Debug, Clone)]
pub struct FeatureImportance {
    pub scores: Vec<f64>,
    /// Feature indices sorted by descending score (ties by feature order).
    pub ranking: Vec<usize>,
}

pub fn permutation_importance(
    model: &dyn Classifier,
    data: &Dataset,
    seed: u64,
) -> FeatureImportance {
    assert!(!data.is_empty(), "importance over empty data");
    let schema = &data.schema;
    let baseline: Vec<i8> = data
        .rows
        .iter()
        .map(|x| model.predict_encoded(&schema.encode_unchecked(x)))
        .collect();
    let n = data.len();
    let mut scores = Vec::with_capacity(schema.arity());
    for fi in 0..schema.arity() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (fi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng);
        let mut flips = 0usize;
        for (ri, x) in data.rows.iter().enumerate() {
            let mut permuted = x.clone();
            permuted.values[fi] = data.rows[perm[ri]].values[fi].clone();
            if model.predict_encoded(&schema.encode_unchecked(&permuted)) != baseline[ri] {
                flips += 1;
            }
        }
        scores.push(flips as f64 / n as f64);
    }
    let mut ranking: Vec<usize> = (0..scores.len()).collect();
    ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    FeatureImportance { scores, ranking }
}

/// Precomputed state shared across per-cluster generation: the unaffected
/// (model-positive) training population, feature importance, and the top
/// replacement categories per categorical feature.
pub struct PreparedGenerator<'a> {
    cfg: GeneratorConfig,
    schema: &'a Schema,
    model: &'a dyn Classifier,
    positives: Vec<Instance>,
    positives_encoded: Vec<Vec<f64>>,
    top_features: Vec<usize>,
    top_categories: Vec<Vec<String>>,
}

impl<'a> PreparedGenerator<'a> {
    pub fn prepare(
        model: &'a dyn Classifier,
        train: &'a Dataset,
        cfg: GeneratorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let schema = &train.schema;
        let mut positives = Vec::new();
        let mut positives_encoded = Vec::new();
        if !matches!(cfg.kind, GeneratorKind::FixedPool(_)) {
            for x in &train.rows {
                let z = schema.encode_unchecked(x);
                if model.predict_encoded(&z) == 1 {
                    positives.push(x.clone());
                    positives_encoded.push(z);
                }
            }
        }

        let (top_features, top_categories) = if cfg.kind == GeneratorKind::RandomSampling {
            let importance = permutation_importance(model, train, cfg.seed);
            let top: Vec<usize> = importance
                .ranking
                .iter()
                .copied()
                .take(cfg.k_f)
                .collect();
            let mut top_cats = vec![Vec::new(); schema.arity()];
            for (fi, f) in schema.features.iter().enumerate() {
                if let FeatureKind::Categorical { labels } = &f.kind {
                    let mut counts: Vec<(usize, usize)> =
                        labels.iter().enumerate().map(|(li, _)| (li, 0)).collect();
                    for p in &positives {
                        let c = p.values[fi].as_cat().expect("schema-conforming row");
                        let pos = labels.iter().position(|l| l == c).expect("known label");
                        counts[pos].1 += 1;
                    }
                    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                    top_cats[fi] = counts
                        .into_iter()
                        .filter(|&(_, n)| n > 0)
                        .take(cfg.k_c)
                        .map(|(li, _)| labels[li].clone())
                        .collect();
                }
            }
            (top, top_cats)
        } else {
            (Vec::new(), Vec::new())
        };

        Ok(PreparedGenerator {
            cfg,
            schema,
            model,
            positives,
            positives_encoded,
            top_features,
            top_categories,
        })
    }

    pub fn has_positives(&self) -> bool {
        !self.positives.is_empty()
    }

    /// Generates up to `m` valid candidate actions for a centroid; the seed
    /// is typically derived per cluster so generation order does not matter.
    pub fn generate(&self, centroid: &Instance, seed: u64) -> Result<Vec<Action>> {
        match &self.cfg.kind {
            GeneratorKind::RandomSampling => Ok(self.random_sampling(centroid, seed)),
            GeneratorKind::NearestNeighbors => self.nearest_neighbors(centroid),
            GeneratorKind::NearestNeighborsScaled => self.nearest_neighbors_scaled(centroid),
            GeneratorKind::FixedPool(pool) => Ok(dedup_actions(pool.clone())),
        }
    }

    fn predict_instance(&self, x: &Instance) -> i8 {
        self.model.predict_encoded(&self.schema.encode_unchecked(x))
    }

    fn random_sampling(&self, centroid: &Instance, seed: u64) -> Vec<Action> {
        if self.predict_instance(centroid) == 1 {
            return Vec::new();
        }
        let m = self.cfg.m;
        let budget = m * RANDOM_SAMPLING_BUDGET_PER_ACTION;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut found: Vec<Action> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        let usable: Vec<usize> = self
            .top_features
            .iter()
            .copied()
            .filter(|&fi| match &self.schema.features[fi].kind {
                FeatureKind::Numeric { .. } => true,
                FeatureKind::Categorical { .. } => !self.top_categories[fi].is_empty(),
            })
            .collect();
        if usable.is_empty() {
            return Vec::new();
        }
        for _ in 0..budget {
            if found.len() >= m {
                break;
            }
            let n_changes = rng.gen_range(1..=usable.len());
            let mut picks = usable.clone();
            // partial Fisher-Yates for a random subset
            for i in 0..n_changes {
                let j = rng.gen_range(i..picks.len());
                picks.swap(i, j);
            }
            let mut action = Action::new();
            for &fi in &picks[..n_changes] {
                let f = &self.schema.features[fi];
                match &f.kind {
                    FeatureKind::Numeric { bin_width, .. } => {
                        let bins = rng.gen_range(1..=10) as f64;
                        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        action.set(f.name.clone(), Change::NumericDelta(sign * bins * bin_width));
                    }
                    FeatureKind::Categorical { .. } => {
                        let cats = &self.top_categories[fi];
                        let target = cats[rng.gen_range(0..cats.len())].clone();
                        action.set(f.name.clone(), Change::CategoricalSet(target));
                    }
                }
            }
            let key = action.canonical_key();
            if seen.contains(&key) {
                continue;
            }
            let candidate = action.apply(centroid, self.schema);
            if self.predict_instance(&candidate) == 1 {
                seen.insert(key);
                found.push(action);
            }
        }
        found.sort_by(|a, b| {
            a.cost(centroid, self.schema)
                .total_cmp(&b.cost(centroid, self.schema))
                .then_with(|| a.canonical_key().cmp(&b.canonical_key()))
        });
        found.truncate(m);
        found
    }

    /// Indices of the `m` nearest positives in encoded L1 distance, ties by
    /// training order.
    fn nearest_positive_indices(&self, centroid: &Instance) -> Result<Vec<usize>> {
        if self.positives.is_empty() {
            return Err(Error::NoUnaffected);
        }
        let z = self.schema.encode_unchecked(centroid);
        let mut order: Vec<(f64, usize)> = self
            .positives_encoded
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&z).map(|(a, b)| (a - b).abs()).sum::<f64>(), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(order.into_iter().take(self.cfg.m).map(|(_, i)| i).collect())
    }

    /// The action turning `from` into `to`: numeric deltas where values
    /// differ, categorical sets where labels differ.
    fn transform_action(&self, from: &Instance, to: &Instance) -> Action {
        let mut action = Action::new();
        for (fi, f) in self.schema.features.iter().enumerate() {
            match (&from.values[fi], &to.values[fi]) {
                (Value::Num(a), Value::Num(b)) => {
                    if a != b {
                        action.set(f.name.clone(), Change::NumericDelta(b - a));
                    }
                }
                (Value::Cat(a), Value::Cat(b)) => {
                    if a != b {
                        action.set(f.name.clone(), Change::CategoricalSet(b.clone()));
                    }
                }
                _ => unreachable!("schema-conforming instances"),
            }
        }
        action
    }

    fn nearest_neighbors(&self, centroid: &Instance) -> Result<Vec<Action>> {
        let idx = self.nearest_positive_indices(centroid)?;
        let actions: Vec<Action> = idx
            .into_iter()
            .map(|i| self.transform_action(centroid, &self.positives[i]))
            .collect();
        Ok(dedup_actions(actions))
    }

    fn nearest_neighbors_scaled(&self, centroid: &Instance) -> Result<Vec<Action>> {
        let idx = self.nearest_positive_indices(centroid)?;
        let samples = self.cfg.line_samples;
        let mut actions = Vec::with_capacity(idx.len());
        for i in idx {
            let neighbor = &self.positives[i];
            let mut chosen: Option<Instance> = None;
            for step in 1..=samples {
                let t = step as f64 / samples as f64;
                let candidate = self.interpolate(centroid, neighbor, t);
                if self.predict_instance(&candidate) == 1 {
                    chosen = Some(candidate);
                    break;
                }
            }
            // t=1 is the neighbor itself, which is positive by construction
            let target = chosen.unwrap_or_else(|| neighbor.clone());
            actions.push(self.transform_action(centroid, &target));
        }
        Ok(dedup_actions(actions))
    }

    /// Point at fraction `t` along the centroid-neighbor segment: numerics
    /// interpolated, differing categoricals switched to the neighbor's label
    /// for any t > 0.
    fn interpolate(&self, from: &Instance, to: &Instance, t: f64) -> Instance {
        let values = from
            .values
            .iter()
            .zip(&to.values)
            .map(|(a, b)| match (a, b) {
                (Value::Num(x), Value::Num(y)) => Value::Num(x + t * (y - x)),
                (Value::Cat(_), Value::Cat(y)) => Value::Cat(y.clone()),
                _ => unreachable!("schema-conforming instances"),
            })
            .collect();
        Instance::new(values)
    }
}

/// One-shot wrappers matching the per-operation contracts. The engine uses
/// [`PreparedGenerator`] directly to share the preprocessing across clusters.
pub fn generate_random_sampling(
    centroid: &Instance,
    model: &dyn Classifier,
    train: &Dataset,
    cfg: &GeneratorConfig,
) -> Result<Vec<Action>> {
    let mut cfg = cfg.clone();
    cfg.kind = GeneratorKind::RandomSampling;
    let prepared = PreparedGenerator::prepare(model, train, cfg.clone())?;
    prepared.generate(centroid, cfg.seed)
}

pub fn generate_nearest_neighbors(
    centroid: &Instance,
    model: &dyn Classifier,
    train: &Dataset,
    cfg: &GeneratorConfig,
) -> Result<Vec<Action>> {
    let mut cfg = cfg.clone();
    cfg.kind = GeneratorKind::NearestNeighbors;
    let prepared = PreparedGenerator::prepare(model, train, cfg.clone())?;
    prepared.generate(centroid, cfg.seed)
}

pub fn generate_nearest_neighbors_scaled(
    centroid: &Instance,
    model: &dyn Classifier,
    train: &Dataset,
    cfg: &GeneratorConfig,
) -> Result<Vec<Action>> {
    let mut cfg = cfg.clone();
    cfg.kind = GeneratorKind::NearestNeighborsScaled;
    let prepared = PreparedGenerator::prepare(model, train, cfg.clone())?;
    prepared.generate(centroid, cfg.seed)
}
